//! The batch active-learning loop: initial random draw, then repeated
//! query, label and retrain, evaluated on a held-out validation set.

mod pool;
mod trainer;

pub use pool::PoolState;
pub use trainer::{RegressorKind, RegressorSpec};

use crate::data::Dataset;
use crate::error::{usage, Error, Result};
use crate::regress::KrrSpec;
use crate::seed;
use crate::strategy::{self, QueryContext, StrategyConfig, StrategyKind};
use std::time::Instant;
use trainer::Trainer;

/// Seed tag of the initial labeled draw; iterations use tags 1, 2, ...
const INIT_TAG: u64 = u64::MAX;
/// Seed tag for main-model fits, shared with [`full_reference`].
const FIT_TAG: u64 = u64::MAX - 1;

/// Whether per-iteration timings are measured or recorded as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Wall,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALConfig {
    /// Strategy kind, committee size, batch size and batch mode. The seed is
    /// replaced per iteration.
    pub strategy: StrategyConfig,
    pub regressor: RegressorSpec,
    /// RSAL residual-model recipe.
    pub residual: KrrSpec,
    pub target: String,
    pub initial_size: usize,
    pub max_labeled: usize,
    pub replicates: usize,
    pub master_seed: u64,
    /// Hyperparameters are reselected every this many iterations.
    pub retune_every: usize,
    pub clock: Clock,
}

impl ALConfig {
    pub fn new(kind: StrategyKind, regressor: RegressorSpec, target: &str) -> Self {
        Self {
            strategy: StrategyConfig::new(kind, 50, 0),
            regressor,
            residual: KrrSpec::default(),
            target: target.into(),
            initial_size: 50,
            max_labeled: 1000,
            replicates: 10,
            master_seed: 0,
            retune_every: 1,
            clock: Clock::Wall,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.strategy.batch_size
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        if self.initial_size < 2 {
            return Err(usage("initial_size must be at least 2"));
        }
        if self.max_labeled < self.initial_size {
            return Err(usage(format!(
                "max_labeled ({}) is below initial_size ({})",
                self.max_labeled, self.initial_size
            )));
        }
        if self.replicates == 0 {
            return Err(usage("replicates must be at least 1"));
        }
        if self.retune_every == 0 {
            return Err(usage("retune_every must be at least 1"));
        }
        if self.strategy.kind.uses_pools() && self.initial_size < self.strategy.pool_count {
            return Err(usage(format!(
                "initial_size ({}) must be at least pool_count ({}) for {}",
                self.initial_size, self.strategy.pool_count, self.strategy.kind
            )));
        }
        Ok(())
    }

    /// Number of curve points when the pool is not exhausted first.
    pub fn expected_points(&self) -> usize {
        1 + (self.max_labeled - self.initial_size).div_ceil(self.batch_size())
    }

    fn fit_seed(&self) -> u64 {
        seed::derive(self.master_seed, FIT_TAG)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub labeled_count: usize,
    pub r_squared: f64,
    pub rmse: f64,
    /// Strategy scoring plus retraining for this iteration.
    pub wall_time_s: f64,
    /// Strategy scoring alone.
    pub query_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveWarning {
    pub iteration: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub strategy: StrategyKind,
    pub regressor: RegressorKind,
    pub replicate: usize,
    pub seed: u64,
    pub initial_labeled: Vec<usize>,
    /// Learning-set indices queried at each iteration, in selection order.
    pub batches: Vec<Vec<usize>>,
    pub points: Vec<CurvePoint>,
    pub warnings: Vec<CurveWarning>,
}

impl ConvergenceCurve {
    pub fn total_time_s(&self) -> f64 {
        self.points.iter().map(|p| p.wall_time_s).sum()
    }

    pub fn total_query_time_s(&self) -> f64 {
        self.points.iter().map(|p| p.query_time_s).sum()
    }
}

/// `1 - SS_res / SS_tot`. Fails for fewer than two values or constant `y_true`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(usage(format!("r_squared: {} targets but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.len() < 2 {
        return Err(usage("r_squared: need at least 2 values"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(ss_tot > 0.0) {
        return Err(usage("r_squared: validation targets have zero variance"));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> f64 {
    let n = y_true.len() as f64;
    (y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum::<f64>() / n).sqrt()
}

/// First point reaching the curve's maximum R², with the wall time
/// accumulated through it: `(labeled_count, r_squared, cumulative_time_s)`.
pub fn samples_to_best(curve: &ConvergenceCurve) -> Result<(usize, f64, f64)> {
    let first = curve.points.first().ok_or_else(|| usage("samples_to_best: empty curve"))?;
    let mut best = (0, first.r_squared);
    for (i, p) in curve.points.iter().enumerate() {
        if p.r_squared > best.1 {
            best = (i, p.r_squared);
        }
    }
    let time = curve.points[..=best.0].iter().map(|p| p.wall_time_s).sum();
    Ok((curve.points[best.0].labeled_count, best.1, time))
}

struct Problem<'a> {
    y: Vec<f64>,
    xv: &'a Dataset,
    yv: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(cfg: &ALConfig, learning: &'a Dataset, validation: &'a Dataset) -> Result<Self> {
        if learning.band_names() != validation.band_names() {
            return Err(usage("learning and validation sets have different bands"));
        }
        Ok(Self {
            y: learning.target(&cfg.target)?,
            yv: validation.target(&cfg.target)?,
            xv: validation,
        })
    }

    fn evaluate(&self, model: &dyn crate::regress::Regressor) -> Result<(f64, f64)> {
        let pred = model.predict(self.xv.features())?;
        Ok((r_squared(&self.yv, &pred)?, rmse(&self.yv, &pred)))
    }
}

fn elapsed(clock: Clock, t: Instant) -> f64 {
    match clock {
        Clock::Wall => t.elapsed().as_secs_f64(),
        Clock::None => 0.0,
    }
}

/// One AL run from a seeded initial draw until `max_labeled` samples are
/// labeled or the candidates run out. The last batch is truncated so the
/// labeled count never exceeds `max_labeled`.
pub fn run_replicate(cfg: &ALConfig, learning: &Dataset, validation: &Dataset, rep_seed: u64) -> Result<ConvergenceCurve> {
    run_replicate_indexed(cfg, learning, validation, rep_seed, 0)
}

fn run_replicate_indexed(
    cfg: &ALConfig,
    learning: &Dataset,
    validation: &Dataset,
    rep_seed: u64,
    replicate: usize,
) -> Result<ConvergenceCurve> {
    cfg.validate()?;
    let prob = Problem::new(cfg, learning, validation)?;
    let n = learning.n_samples();
    if n < cfg.initial_size + cfg.batch_size() {
        return Err(usage(format!(
            "learning set of {n} samples is smaller than initial_size + batch_size ({})",
            cfg.initial_size + cfg.batch_size()
        )));
    }
    let fit_seed = cfg.fit_seed();
    let mut rng = seed::rng(seed::derive(rep_seed, INIT_TAG));
    let initial = rand::seq::index::sample(&mut rng, n, cfg.initial_size).into_vec();
    let mut state = PoolState::new(learning.features(), &prob.y, &initial)?;
    let initial_labeled = state.labeled().to_vec();
    let mut trainer = Trainer::new(&cfg.regressor);
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let mut batches = Vec::new();

    let record = |it: usize, model: &dyn crate::regress::Regressor, warnings: &mut Vec<CurveWarning>| {
        for w in model.warnings() {
            warnings.push(CurveWarning {
                iteration: it,
                message: w.clone(),
            });
        }
        prob.evaluate(model)
    };

    let t0 = Instant::now();
    let model = trainer.fit(state.labeled_features().as_ref(), &state.labeled_targets(), fit_seed, true)?;
    let (r2, e) = record(0, model.as_ref(), &mut warnings)?;
    points.push(CurvePoint {
        labeled_count: state.labeled().len(),
        r_squared: r2,
        rmse: e,
        wall_time_s: elapsed(cfg.clock, t0),
        query_time_s: 0.0,
    });

    let ctx = QueryContext {
        factory: &cfg.regressor,
        residual: &cfg.residual,
    };
    let mut it = 0;
    while state.labeled().len() < cfg.max_labeled && !state.candidates().is_empty() {
        it += 1;
        let b = cfg.batch_size().min(cfg.max_labeled - state.labeled().len()).min(state.candidates().len());
        let scfg = StrategyConfig {
            batch_size: b,
            rng_seed: seed::derive(rep_seed, it as u64),
            ..cfg.strategy.clone()
        };
        let t_iter = Instant::now();
        let mut batch = strategy::select(&state, &scfg, &ctx)?;
        let query_time = elapsed(cfg.clock, t_iter);
        if batch.indices.len() != b {
            return Err(Error::Numerical(format!(
                "{} returned {} samples, expected {b}",
                scfg.kind,
                batch.indices.len()
            )));
        }
        warnings.extend(std::mem::take(&mut batch.warnings).into_iter().map(|message| CurveWarning { iteration: it, message }));
        state.label(&batch.indices)?;
        batches.push(batch.indices);
        let retune = it % cfg.retune_every == 0;
        let model = trainer.fit(state.labeled_features().as_ref(), &state.labeled_targets(), fit_seed, retune)?;
        let wall = elapsed(cfg.clock, t_iter);
        let (r2, e) = record(it, model.as_ref(), &mut warnings)?;
        points.push(CurvePoint {
            labeled_count: state.labeled().len(),
            r_squared: r2,
            rmse: e,
            wall_time_s: wall,
            query_time_s: query_time,
        });
    }
    Ok(ConvergenceCurve {
        strategy: cfg.strategy.kind,
        regressor: cfg.regressor.kind,
        replicate,
        seed: rep_seed,
        initial_labeled,
        batches,
        points,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub curves: Vec<ConvergenceCurve>,
    /// Pointwise mean of R², RMSE and timings over replicates.
    pub mean_curve: ConvergenceCurve,
}

pub fn replicate_seed(master_seed: u64, replicate: usize) -> u64 {
    seed::derive(master_seed, replicate as u64)
}

/// Runs `cfg.replicates` replicates with seeds derived from the master seed.
/// Replicates run sequentially; their seeds do not depend on order.
pub fn run_experiment(cfg: &ALConfig, learning: &Dataset, validation: &Dataset) -> Result<Experiment> {
    cfg.validate()?;
    let mut curves = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        let s = replicate_seed(cfg.master_seed, r);
        let curve = run_replicate_indexed(cfg, learning, validation, s, r).map_err(|e| Error::Replicate {
            strategy: cfg.strategy.kind.to_string(),
            replicate: r,
            seed: s,
            source: Box::new(e),
        })?;
        curves.push(curve);
    }
    let mean_curve = mean_curve(&curves)?;
    Ok(Experiment { curves, mean_curve })
}

fn mean_curve(curves: &[ConvergenceCurve]) -> Result<ConvergenceCurve> {
    let first = curves.first().ok_or_else(|| usage("no curves to average"))?;
    let grid: Vec<usize> = first.points.iter().map(|p| p.labeled_count).collect();
    for c in curves {
        if c.points.iter().map(|p| p.labeled_count).ne(grid.iter().copied()) {
            return Err(Error::Numerical("replicate curves have different labeled-count grids".into()));
        }
    }
    let k = curves.len() as f64;
    let avg = |i: usize, f: fn(&CurvePoint) -> f64| curves.iter().map(|c| f(&c.points[i])).sum::<f64>() / k;
    let points = (0..grid.len())
        .map(|i| CurvePoint {
            labeled_count: grid[i],
            r_squared: avg(i, |p| p.r_squared),
            rmse: avg(i, |p| p.rmse),
            wall_time_s: avg(i, |p| p.wall_time_s),
            query_time_s: avg(i, |p| p.query_time_s),
        })
        .collect();
    Ok(ConvergenceCurve {
        strategy: first.strategy,
        regressor: first.regressor,
        replicate: 0,
        seed: first.seed,
        initial_labeled: Vec::new(),
        batches: Vec::new(),
        points,
        warnings: Vec::new(),
    })
}

/// R² and RMSE of the model trained on the whole learning set.
pub fn full_reference(learning: &Dataset, validation: &Dataset, cfg: &ALConfig) -> Result<(f64, f64)> {
    let prob = Problem::new(cfg, learning, validation)?;
    let mut trainer = Trainer::new(&cfg.regressor);
    let model = trainer.fit(learning.features(), &prob.y, cfg.fit_seed(), true)?;
    prob.evaluate(model.as_ref())
}
