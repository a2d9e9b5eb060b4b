use super::krr::{dual_predict, krr_train_from_sq_dist, KrrModel};
use super::{check_training, median_heuristic, TargetScaler, MEDIAN_SUBSAMPLE};
use crate::error::{usage, Error, Result};
use crate::kernel::{cholesky, kernel_from_sq_dist, sq_distances_sym, KernelParams};
use crate::{Matrix, MatRef};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub params: KernelParams,
    pub ridge_lambda: f64,
    pub cv_rmse: f64,
}

fn dedup_descending(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g.dedup();
    g
}

/// Grid search over `(lengthscale, lambda)` by k-fold cross-validation.
///
/// Row `i` belongs to fold `i % folds`. The grid point with the lowest mean
/// fold RMSE wins; exact ties go to the larger lengthscale, then the larger
/// lambda. The kernel signal variance is fixed at 1 since targets are
/// standardized and the ridge term sets the relative noise level.
pub fn krr_tune(
    x: MatRef<'_, f64>,
    y: &[f64],
    lengthscale_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
) -> Result<TuneResult> {
    let d2 = sq_distances_sym(x);
    tune_with_sq_dist(x, d2.as_ref(), y, lengthscale_grid, lambda_grid, folds)
}

fn tune_with_sq_dist(
    x: MatRef<'_, f64>,
    d2: MatRef<'_, f64>,
    y: &[f64],
    lengthscale_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
) -> Result<TuneResult> {
    let n = x.nrows();
    if folds < 2 {
        return Err(usage(format!("krr_tune: need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(usage(format!("krr_tune: {n} samples is fewer than {folds} folds")));
    }
    if n != y.len() {
        return Err(usage("krr_tune: feature and target lengths differ"));
    }
    if lengthscale_grid.is_empty() || lambda_grid.is_empty() {
        return Err(usage("krr_tune: empty hyperparameter grid"));
    }
    if lengthscale_grid.iter().chain(lambda_grid).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(usage("krr_tune: grid values must be positive and finite"));
    }
    let lengthscales = dedup_descending(lengthscale_grid);
    let lambdas = dedup_descending(lambda_grid);

    let fold_rows: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds == f);
            (train, test)
        })
        .collect();

    let mut best: Option<TuneResult> = None;
    for &ls in &lengthscales {
        let params = KernelParams::new(ls, 1.0)?;
        let k = kernel_from_sq_dist(d2, &params);
        let mut rmse_sum = vec![0.0; lambdas.len()];
        for (train, test) in &fold_rows {
            let ntr = train.len();
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let (scaler, _) = TargetScaler::fit_quiet(&ytr);
            let ys = scaler.apply(&ytr);
            let rhs = Matrix::from_fn(ntr, 1, |i, _| ys[i]);
            let k_cross = Matrix::from_fn(test.len(), ntr, |i, j| k[(test[i], train[j])]);
            for (li, &lam) in lambdas.iter().enumerate() {
                let ridge = ntr as f64 * lam;
                let a = Matrix::from_fn(ntr, ntr, |i, j| {
                    k[(train[i], train[j])] + if i == j { ridge } else { 0.0 }
                });
                let rmse = match cholesky(a.as_ref()) {
                    Ok(f) => {
                        let alpha = f.solve(rhs.as_ref());
                        let alpha: Vec<f64> = (0..ntr).map(|i| alpha[(i, 0)]).collect();
                        let pred = dual_predict(k_cross.as_ref(), &alpha, scaler.mean, scaler.scale);
                        let sse: f64 = test.iter().zip(&pred).map(|(&i, p)| (y[i] - p) * (y[i] - p)).sum();
                        (sse / test.len() as f64).sqrt()
                    }
                    Err(_) => f64::INFINITY,
                };
                rmse_sum[li] += rmse;
            }
        }
        for (li, &lam) in lambdas.iter().enumerate() {
            let cv_rmse = rmse_sum[li] / folds as f64;
            if !cv_rmse.is_finite() {
                continue;
            }
            if best.map_or(true, |b| cv_rmse < b.cv_rmse) {
                best = Some(TuneResult {
                    params,
                    ridge_lambda: lam,
                    cv_rmse,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("krr_tune: every grid point failed to factorize".into()))
}

/// KRR training recipe: lengthscales are multiples of the median-distance
/// heuristic, chosen jointly with the ridge lambda by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrrSpec {
    pub lengthscale_factors: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
}

impl Default for KrrSpec {
    fn default() -> Self {
        Self {
            lengthscale_factors: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            lambdas: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            folds: 3,
        }
    }
}

impl KrrSpec {
    pub fn lengthscale_grid(&self, x: MatRef<'_, f64>, seed: u64) -> Vec<f64> {
        let med = median_heuristic(x, MEDIAN_SUBSAMPLE, seed);
        self.lengthscale_factors.iter().map(|f| f * med).collect()
    }

    /// Tunes on `(x, y)` then trains the final model on all of it.
    pub fn fit(&self, x: MatRef<'_, f64>, y: &[f64], seed: u64) -> Result<(KrrModel, TuneResult)> {
        let mut warnings = Vec::new();
        check_training(x, y, "krr", &mut warnings)?;
        let d2 = sq_distances_sym(x);
        let grid = self.lengthscale_grid(x, seed);
        let folds = self.folds.min(x.nrows());
        let tuned = tune_with_sq_dist(x, d2.as_ref(), y, &grid, &self.lambdas, folds)?;
        let model = krr_train_from_sq_dist(x, d2.as_ref(), y, &tuned.params, tuned.ridge_lambda, warnings)?;
        Ok((model, tuned))
    }
}
