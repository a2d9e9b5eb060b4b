//! Experiment configuration files (TOML).
//!
//! ```toml
//! [data]
//! lut = "lut.csv"               # or a [data.synthetic] table
//! features = ["R443", "R490"]
//! targets = ["LCC", "LAI"]
//! learn_fraction = 0.5
//!
//! [experiment]
//! target = "LCC"
//! regressor = "krr"             # or "gpr"
//! strategies = ["PAL", "EBD", "RANDOM"]   # or ["all"]
//! replicates = 10
//! ```

use crate::data::{load_lut, split, standardize_fit_apply, synthetic_generate, Dataset, SyntheticConfig};
use crate::engine::{ALConfig, Clock, RegressorKind, RegressorSpec};
use crate::error::Result;
use crate::regress::{GprOptions, KrrSpec};
use crate::strategy::{BatchMode, StrategyConfig, StrategyKind};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub lut: Option<PathBuf>,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default = "half")]
    pub learn_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Standardize bands with learning-set statistics before the experiment.
    #[serde(default)]
    pub standardize: bool,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub target: String,
    #[serde(default = "default_regressor")]
    pub regressor: RegressorKind,
    pub strategies: Vec<String>,
    #[serde(default = "fifty")]
    pub initial_size: usize,
    #[serde(default = "fifty")]
    pub batch_size: usize,
    #[serde(default = "thousand")]
    pub max_labeled: usize,
    #[serde(default = "ten")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub retune_every: usize,
    #[serde(default = "five")]
    pub pool_count: usize,
    #[serde(default)]
    pub batch_mode: BatchMode,
}

fn default_regressor() -> RegressorKind {
    RegressorKind::Krr
}
fn fifty() -> usize {
    50
}
fn thousand() -> usize {
    1000
}
fn ten() -> usize {
    10
}
fn five() -> usize {
    5
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// `"none"` records every timing as 0, making output files a pure
    /// function of the configuration and data.
    #[serde(default)]
    pub clock: Clock,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub data: DataSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub krr: KrrSpec,
    #[serde(default)]
    pub gpr: GprOptions,
    /// RSAL residual-model recipe.
    #[serde(default)]
    pub residual: KrrSpec,
    #[serde(default)]
    pub output: OutputSection,
}

/// A configuration problem, located in the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of a byte offset.
fn locate(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

/// Line of `key = ...` inside `[section]`, falling back to the section header.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, message: String) -> ConfigError {
        ConfigError {
            line: key_line(self.text, section, key),
            column: None,
            message: format!("{section}.{key}: {message}"),
        }
    }
}

pub fn parse_config(text: &str) -> std::result::Result<ExperimentSpec, ConfigError> {
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(s) => {
                let (l, c) = locate(text, s.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        ConfigError {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    spec.check(&Checker { text })?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> std::result::Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        column: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut spec = parse_config(&text)?;
    if let (Some(lut), Some(dir)) = (&spec.data.lut, path.parent()) {
        if lut.is_relative() {
            spec.data.lut = Some(dir.join(lut));
        }
    }
    Ok(spec)
}

impl ExperimentSpec {
    fn check(&self, c: &Checker<'_>) -> std::result::Result<(), ConfigError> {
        let d = &self.data;
        let e = &self.experiment;
        match (&d.lut, &d.synthetic) {
            (Some(_), Some(_)) => return Err(c.fail("data", "lut", "give either a LUT file or [data.synthetic], not both".into())),
            (None, None) => return Err(c.fail("data", "lut", "a LUT file or a [data.synthetic] table is required".into())),
            (Some(_), None) => {
                if d.features.is_empty() {
                    return Err(c.fail("data", "features", "at least one feature column is required".into()));
                }
                if d.targets.is_empty() {
                    return Err(c.fail("data", "targets", "at least one target column is required".into()));
                }
                if !d.targets.contains(&e.target) {
                    return Err(c.fail("experiment", "target", format!("'{}' is not among data.targets", e.target)));
                }
            }
            (None, Some(s)) => {
                s.validate().map_err(|err| ConfigError {
                    line: key_line(c.text, "data.synthetic", "n_samples"),
                    column: None,
                    message: err.to_string(),
                })?;
                if !s.targets.iter().any(|t| t.name == e.target) {
                    return Err(c.fail(
                        "experiment",
                        "target",
                        format!("'{}' is not a synthetic target variable", e.target),
                    ));
                }
            }
        }
        if !(d.learn_fraction > 0.0 && d.learn_fraction < 1.0) {
            return Err(c.fail("data", "learn_fraction", "must lie strictly between 0 and 1".into()));
        }
        let kinds = self.strategies().map_err(|m| c.fail("experiment", "strategies", m))?;
        if e.batch_size == 0 {
            return Err(c.fail("experiment", "batch_size", "must be at least 1".into()));
        }
        if e.initial_size < 2 {
            return Err(c.fail("experiment", "initial_size", "must be at least 2".into()));
        }
        if e.max_labeled < e.initial_size {
            return Err(c.fail("experiment", "max_labeled", "must be at least initial_size".into()));
        }
        if e.replicates == 0 {
            return Err(c.fail("experiment", "replicates", "must be at least 1".into()));
        }
        if e.retune_every == 0 {
            return Err(c.fail("experiment", "retune_every", "must be at least 1".into()));
        }
        if kinds.iter().any(|k| k.uses_pools()) {
            if e.pool_count < 2 {
                return Err(c.fail("experiment", "pool_count", "must be at least 2".into()));
            }
            if e.initial_size < e.pool_count {
                return Err(c.fail("experiment", "initial_size", "must be at least pool_count".into()));
            }
        }
        for (section, spec) in [("krr", &self.krr), ("residual", &self.residual)] {
            if spec.lengthscale_factors.is_empty() || spec.lengthscale_factors.iter().any(|f| !(*f > 0.0)) {
                return Err(c.fail(section, "lengthscale_factors", "must be a non-empty list of positive numbers".into()));
            }
            if spec.lambdas.is_empty() || spec.lambdas.iter().any(|f| !(*f > 0.0)) {
                return Err(c.fail(section, "lambdas", "must be a non-empty list of positive numbers".into()));
            }
            if spec.folds < 2 {
                return Err(c.fail(section, "folds", "must be at least 2".into()));
            }
        }
        if self.gpr.restart_factors.iter().any(|f| !(*f > 0.0)) {
            return Err(c.fail("gpr", "restart_factors", "must be positive".into()));
        }
        if !(self.gpr.init_noise_fraction > 0.0) {
            return Err(c.fail("gpr", "init_noise_fraction", "must be positive".into()));
        }
        Ok(())
    }

    /// Strategies in configuration order; `"all"` expands to every strategy.
    pub fn strategies(&self) -> std::result::Result<Vec<StrategyKind>, String> {
        let names = &self.experiment.strategies;
        if names.is_empty() {
            return Err("at least one strategy is required".into());
        }
        let mut out = Vec::new();
        for n in names {
            if n.eq_ignore_ascii_case("all") {
                out.extend(StrategyKind::ALL);
                continue;
            }
            out.push(n.parse::<StrategyKind>().map_err(|_| {
                format!("unknown strategy '{n}' (expected PAL, EQB, RSAL, EBD, ABD, CBD, RANDOM or all)")
            })?);
        }
        let mut seen = Vec::new();
        out.retain(|k| {
            let fresh = !seen.contains(k);
            seen.push(*k);
            fresh
        });
        Ok(out)
    }

    pub fn regressor(&self) -> RegressorSpec {
        RegressorSpec {
            kind: self.experiment.regressor,
            krr: self.krr.clone(),
            gpr: self.gpr.clone(),
        }
    }

    pub fn al_config(&self, kind: StrategyKind) -> ALConfig {
        let e = &self.experiment;
        ALConfig {
            strategy: StrategyConfig {
                kind,
                pool_count: e.pool_count,
                batch_size: e.batch_size,
                rng_seed: 0,
                batch_mode: e.batch_mode,
            },
            regressor: self.regressor(),
            residual: self.residual.clone(),
            target: e.target.clone(),
            initial_size: e.initial_size,
            max_labeled: e.max_labeled,
            replicates: e.replicates,
            master_seed: e.master_seed,
            retune_every: e.retune_every,
            clock: self.output.clock,
        }
    }

    /// The full dataset: the LUT file or a freshly generated surrogate.
    pub fn dataset(&self) -> Result<Dataset> {
        match (&self.data.lut, &self.data.synthetic) {
            (Some(path), _) => load_lut(path, &self.data.features, &self.data.targets),
            (None, Some(s)) => synthetic_generate(s),
            (None, None) => Err(crate::error::usage("no data source configured")),
        }
    }

    /// Learning and validation sets, standardized if configured, plus any
    /// standardization warnings.
    pub fn learning_validation(&self) -> Result<(Dataset, Dataset, Vec<String>)> {
        let ds = self.dataset()?;
        ds.target_index(&self.experiment.target)?;
        let (l, v) = split(&ds, self.data.learn_fraction, self.data.split_seed)?;
        if self.data.standardize {
            let (l, v, _, w) = standardize_fit_apply(&l, &v);
            Ok((l, v, w))
        } else {
            Ok((l, v, Vec::new()))
        }
    }
}
