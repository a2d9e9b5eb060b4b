//! Query strategies: committee variance (PAL), committee entropy (EQB),
//! residual regression (RSAL), distance (EBD), angle (ABD) and cluster (CBD)
//! diversity, and the random baseline.
//!
//! Every strategy returns learning-set row indices drawn from the current
//! candidate set. Ties are broken in favour of the lowest index.

mod diversity;
mod kmeans;
mod uncertainty;

pub use diversity::{abd_select, angle, cbd_select, ebd_select, sq_euclidean};
pub use kmeans::{kmeans, KMeansResult, KMEANS_MAX_ITER, KMEANS_RESTARTS};
pub use uncertainty::{
    binned_entropy, committee_variance, eqb_bins, eqb_select, pal_select, rsal_select, RSAL_FOLDS, RSAL_MIN_LABELED,
};

use crate::engine::PoolState;
use crate::error::{usage, Result};
use crate::regress::{KrrSpec, RegressorFactory};
use crate::seed;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    Pal,
    Eqb,
    Rsal,
    Ebd,
    Abd,
    Cbd,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Pal,
        StrategyKind::Eqb,
        StrategyKind::Rsal,
        StrategyKind::Ebd,
        StrategyKind::Abd,
        StrategyKind::Cbd,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Pal => "PAL",
            StrategyKind::Eqb => "EQB",
            StrategyKind::Rsal => "RSAL",
            StrategyKind::Ebd => "EBD",
            StrategyKind::Abd => "ABD",
            StrategyKind::Cbd => "CBD",
            StrategyKind::Random => "RANDOM",
        }
    }

    /// Whether the strategy trains a committee of `pool_count` regressors.
    pub fn uses_pools(self) -> bool {
        matches!(self, StrategyKind::Pal | StrategyKind::Eqb)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| usage(format!("unknown strategy '{s}'")))
    }
}

/// How EBD and ABD fill a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    /// Each pick is provisionally added to the labeled set before rescoring.
    #[default]
    Greedy,
    /// Top-B of the initial scores.
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub pool_count: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub batch_mode: BatchMode,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, batch_size: usize, rng_seed: u64) -> Self {
        Self {
            kind,
            pool_count: 5,
            batch_size,
            rng_seed,
            batch_mode: BatchMode::Greedy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(usage("batch size must be at least 1"));
        }
        if self.kind.uses_pools() && self.pool_count < 2 {
            return Err(usage(format!("{}: pool_count must be at least 2", self.kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryBatch {
    /// Learning-set row indices, in selection order.
    pub indices: Vec<usize>,
    /// Criterion value of each selected sample.
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Models the uncertainty strategies may train.
pub struct QueryContext<'a> {
    /// Builds the main regressor and committee members.
    pub factory: &'a dyn RegressorFactory,
    /// Recipe for the RSAL residual model.
    pub residual: &'a KrrSpec,
}

/// Runs the configured strategy.
pub fn select(state: &PoolState<'_>, cfg: &StrategyConfig, ctx: &QueryContext<'_>) -> Result<QueryBatch> {
    cfg.validate()?;
    match cfg.kind {
        StrategyKind::Pal => pal_select(state, cfg, ctx.factory),
        StrategyKind::Eqb => eqb_select(state, cfg, ctx.factory),
        StrategyKind::Rsal => rsal_select(state, cfg, ctx.factory, ctx.residual),
        StrategyKind::Ebd => ebd_select(state, cfg),
        StrategyKind::Abd => abd_select(state, cfg),
        StrategyKind::Cbd => cbd_select(state, cfg),
        StrategyKind::Random => Ok(random_select(state, cfg)),
    }
}

/// `B` candidates drawn uniformly without replacement.
pub fn random_select(state: &PoolState<'_>, cfg: &StrategyConfig) -> QueryBatch {
    let cand = state.candidates();
    let b = cfg.batch_size.min(cand.len());
    let mut rng = seed::rng(cfg.rng_seed);
    let picks = rand::seq::index::sample(&mut rng, cand.len(), b).into_vec();
    QueryBatch {
        indices: picks.iter().map(|&p| cand[p]).collect(),
        scores: vec![0.0; b],
        warnings: Vec::new(),
    }
}

/// Random selection carrying a warning, used when a strategy cannot score.
pub(crate) fn fallback(state: &PoolState<'_>, cfg: &StrategyConfig, reason: String) -> QueryBatch {
    log::warn!("{}: {reason}; falling back to random selection", cfg.kind);
    let mut batch = random_select(state, cfg);
    batch.warnings.push(format!("{}: {reason}; fell back to random selection", cfg.kind));
    batch
}

/// Positions of the `b` largest scores, highest first, ties by position.
/// NaN scores rank below everything.
pub(crate) fn top_b(scores: &[f64], b: usize) -> Vec<usize> {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| key(scores[j]).total_cmp(&key(scores[i])).then(i.cmp(&j)));
    order.truncate(b);
    order
}

/// Maps positions in the candidate list back to learning-set indices.
pub(crate) fn batch_from_positions(
    state: &PoolState<'_>,
    positions: &[usize],
    scores: &[f64],
    warnings: Vec<String>,
) -> QueryBatch {
    let cand = state.candidates();
    QueryBatch {
        indices: positions.iter().map(|&p| cand[p]).collect(),
        scores: positions.iter().map(|&p| scores[p]).collect(),
        warnings,
    }
}
