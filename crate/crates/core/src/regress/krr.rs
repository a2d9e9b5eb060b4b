use super::{check_query, check_training, TargetScaler};
use crate::error::{usage, Result};
use crate::kernel::{chol_solve, kernel_from_sq_dist, kernel_matrix, sq_distances_sym, KernelParams};
use crate::{Matrix, MatRef};

/// Kernel ridge regression in dual form.
///
/// The dual weights solve `(K + n * ridge_lambda * I) alpha = y_std`, where
/// `y_std` are the standardized training targets. The `n` scaling keeps a
/// given `ridge_lambda` meaningful as the training set grows.
#[derive(Debug, Clone)]
pub struct KrrModel {
    pub kernel_params: KernelParams,
    pub ridge_lambda: f64,
    pub dual_weights: Vec<f64>,
    pub training_inputs: Matrix,
    pub target_mean: f64,
    pub target_scale: f64,
    /// Diagonal jitter added by the solver beyond the ridge term.
    pub jitter_used: f64,
    pub warnings: Vec<String>,
}

pub fn krr_train(
    x: MatRef<'_, f64>,
    y: &[f64],
    params: &KernelParams,
    ridge_lambda: f64,
) -> Result<KrrModel> {
    let mut warnings = Vec::new();
    check_training(x, y, "krr_train", &mut warnings)?;
    if !(ridge_lambda > 0.0 && ridge_lambda.is_finite()) {
        return Err(usage(format!("krr_train: ridge lambda must be positive, got {ridge_lambda}")));
    }
    let d2 = sq_distances_sym(x);
    krr_train_from_sq_dist(x, d2.as_ref(), y, params, ridge_lambda, warnings)
}

pub(crate) fn krr_train_from_sq_dist(
    x: MatRef<'_, f64>,
    d2: MatRef<'_, f64>,
    y: &[f64],
    params: &KernelParams,
    ridge_lambda: f64,
    mut warnings: Vec<String>,
) -> Result<KrrModel> {
    let n = x.nrows();
    let scaler = TargetScaler::fit(y, &mut warnings);
    let ys = scaler.apply(y);
    let mut k = kernel_from_sq_dist(d2, params);
    let ridge = n as f64 * ridge_lambda;
    for i in 0..n {
        k[(i, i)] += ridge;
    }
    let rhs = Matrix::from_fn(n, 1, |i, _| ys[i]);
    let (alpha, factor) = chol_solve(k.as_ref(), rhs.as_ref())?;
    Ok(KrrModel {
        kernel_params: *params,
        ridge_lambda,
        dual_weights: (0..n).map(|i| alpha[(i, 0)]).collect(),
        training_inputs: x.to_owned(),
        target_mean: scaler.mean,
        target_scale: scaler.scale,
        jitter_used: factor.jitter_used(),
        warnings,
    })
}

pub fn krr_predict(model: &KrrModel, xq: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_query(model.training_inputs.as_ref(), xq, "krr_predict")?;
    let kq = kernel_matrix(xq, model.training_inputs.as_ref(), &model.kernel_params)?;
    Ok(dual_predict(kq.as_ref(), &model.dual_weights, model.target_mean, model.target_scale))
}

pub(crate) fn dual_predict(kq: MatRef<'_, f64>, alpha: &[f64], mean: f64, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; kq.nrows()];
    for (j, a) in alpha.iter().enumerate() {
        let col = kq.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * a;
        }
    }
    out.iter().map(|v| v * scale + mean).collect()
}
