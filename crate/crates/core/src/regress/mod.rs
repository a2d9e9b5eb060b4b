//! Kernel ridge regression and Gaussian process regression.
//!
//! Both models standardize their targets internally and de-standardize on
//! prediction, so callers always work in the original target units.

mod gpr;
mod krr;
mod tune;

pub use gpr::{
    gpr_fit_fixed, gpr_log_ml, gpr_predict, gpr_train, GprHyper, GprModel, GprOptions,
};
pub use krr::{krr_predict, krr_train, KrrModel};
pub use tune::{krr_tune, KrrSpec, TuneResult};

use crate::error::{usage, Result};
use crate::MatRef;

/// Training-set size above which training emits a cost warning.
pub const SOFT_SAMPLE_CAP: usize = 5000;

/// A fitted model that maps feature rows to target predictions.
pub trait Regressor {
    fn predict(&self, xq: MatRef<'_, f64>) -> Result<Vec<f64>>;
    /// Warnings raised while fitting (degenerate targets, size cap, ...).
    fn warnings(&self) -> &[String];
}

/// Trains regressors on demand. Query strategies use this to build
/// committees and residual models without knowing the model family.
pub trait RegressorFactory {
    fn fit(&self, x: MatRef<'_, f64>, y: &[f64], seed: u64) -> Result<Box<dyn Regressor>>;
}

impl Regressor for KrrModel {
    fn predict(&self, xq: MatRef<'_, f64>) -> Result<Vec<f64>> {
        krr_predict(self, xq)
    }
    fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

impl Regressor for GprModel {
    fn predict(&self, xq: MatRef<'_, f64>) -> Result<Vec<f64>> {
        gpr_predict(self, xq).map(|(mean, _)| mean)
    }
    fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Zero-mean, unit-variance target transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TargetScaler {
    pub mean: f64,
    pub scale: f64,
}

impl TargetScaler {
    /// Falls back to `scale = 1` (with a warning) for zero-variance targets.
    pub fn fit(y: &[f64], warnings: &mut Vec<String>) -> Self {
        let (scaler, degenerate) = Self::fit_quiet(y);
        if degenerate {
            let msg = format!(
                "targets have zero variance (mean {}); training on raw targets",
                scaler.mean
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        scaler
    }

    /// Returns the scaler and whether the targets were degenerate.
    pub fn fit_quiet(y: &[f64]) -> (Self, bool) {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            (Self { mean, scale: 1.0 }, true)
        } else {
            (Self { mean, scale: sd }, false)
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.scale).collect()
    }
}

pub(crate) fn check_training(x: MatRef<'_, f64>, y: &[f64], what: &str, warnings: &mut Vec<String>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(usage(format!(
            "{what}: {} feature rows but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(usage(format!("{what}: need at least 2 training samples, got {}", x.nrows())));
    }
    if x.ncols() == 0 {
        return Err(usage(format!("{what}: zero feature columns")));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(usage(format!("{what}: non-finite target at row {i}")));
    }
    if x.nrows() > SOFT_SAMPLE_CAP {
        let msg = format!(
            "{what}: {} training samples exceeds the soft cap of {SOFT_SAMPLE_CAP}; expect slow training",
            x.nrows()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(())
}

/// Median pairwise distance over at most `max_rows` rows (a seeded random
/// subsample when there are more).
pub fn median_heuristic(x: MatRef<'_, f64>, max_rows: usize, seed: u64) -> f64 {
    let n = x.nrows();
    let rows: Vec<usize> = if n <= max_rows {
        (0..n).collect()
    } else {
        let mut rng = crate::seed::rng(seed);
        let mut picked = rand::seq::index::sample(&mut rng, n, max_rows).into_vec();
        picked.sort_unstable();
        picked
    };
    crate::kernel::median_distance(x, &rows)
}

/// Rows of the median-heuristic subsample.
pub const MEDIAN_SUBSAMPLE: usize = 500;

pub(crate) fn check_query(x_train: MatRef<'_, f64>, xq: MatRef<'_, f64>, what: &str) -> Result<()> {
    if x_train.ncols() != xq.ncols() {
        return Err(usage(format!(
            "{what}: query has {} columns, model was trained on {}",
            xq.ncols(),
            x_train.ncols()
        )));
    }
    Ok(())
}
