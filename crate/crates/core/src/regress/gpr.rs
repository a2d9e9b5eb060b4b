use super::krr::dual_predict;
use super::{check_query, check_training, median_heuristic, TargetScaler, MEDIAN_SUBSAMPLE};
use crate::error::{usage, Error, Result};
use crate::kernel::{cholesky, kernel_from_sq_dist, kernel_matrix, sq_distances_sym, CholeskyFactor, KernelParams};
use crate::{Matrix, MatRef};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// GP hyperparameters, expressed for standardized targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GprHyper {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Marginal-likelihood optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GprOptions {
    pub max_iter: usize,
    /// Stop once the projected gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// Restart lengthscales as multiples of the median-distance heuristic.
    pub restart_factors: Vec<f64>,
    /// Initial noise variance as a fraction of the target variance.
    pub init_noise_fraction: f64,
}

impl Default for GprOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-5,
            restart_factors: vec![1.0, 0.5, 2.0],
            init_noise_fraction: 0.1,
        }
    }
}

/// Gaussian process posterior with an RBF kernel and Gaussian noise.
#[derive(Debug, Clone)]
pub struct GprModel {
    pub kernel_params: KernelParams,
    pub noise_variance: f64,
    /// `(K + noise I)^-1 y_std`.
    pub dual_weights: Vec<f64>,
    pub chol: CholeskyFactor,
    pub training_inputs: Matrix,
    pub target_mean: f64,
    pub target_scale: f64,
    /// Log marginal likelihood of the standardized targets.
    pub log_marginal_likelihood: f64,
    pub warnings: Vec<String>,
}

impl GprModel {
    pub fn hyper(&self) -> GprHyper {
        GprHyper {
            lengthscale: self.kernel_params.lengthscale(),
            signal_variance: self.kernel_params.signal_variance(),
            noise_variance: self.noise_variance,
        }
    }
}

struct Evaluation {
    value: f64,
    grad: [f64; 3],
}

struct Objective<'a> {
    d2: MatRef<'a, f64>,
    y: &'a [f64],
}

fn hyper_from_log(theta: [f64; 3]) -> (f64, f64, f64) {
    (theta[0].exp(), theta[1].exp(), theta[2].exp())
}

impl Objective<'_> {
    fn factor(&self, theta: [f64; 3]) -> Result<(Matrix, CholeskyFactor, Vec<f64>)> {
        let (ls, sv, nv) = hyper_from_log(theta);
        let params = KernelParams::new(ls, sv)?;
        let kf = kernel_from_sq_dist(self.d2, &params);
        let mut kn = kf.clone();
        for i in 0..kn.nrows() {
            kn[(i, i)] += nv;
        }
        let factor = cholesky(kn.as_ref())?;
        let alpha = factor.solve_vec(self.y);
        Ok((kf, factor, alpha))
    }

    fn value_from(&self, factor: &CholeskyFactor, alpha: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        let fit: f64 = self.y.iter().zip(alpha).map(|(a, b)| a * b).sum();
        -0.5 * fit - 0.5 * factor.log_det() - 0.5 * n * (2.0 * PI).ln()
    }

    fn value(&self, theta: [f64; 3]) -> Result<f64> {
        let (_, factor, alpha) = self.factor(theta)?;
        Ok(self.value_from(&factor, &alpha))
    }

    fn eval(&self, theta: [f64; 3]) -> Result<Evaluation> {
        let (kf, factor, alpha) = self.factor(theta)?;
        let value = self.value_from(&factor, &alpha);
        let (ls, _, nv) = hyper_from_log(theta);
        let inv = factor.inverse();
        let n = alpha.len();
        let inv_l2 = 1.0 / (ls * ls);
        let (mut g_ls, mut g_sv, mut g_nv) = (0.0, 0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let w = alpha[i] * alpha[j] - inv[(i, j)];
                let k = kf[(i, j)];
                g_sv += w * k;
                g_ls += w * k * self.d2[(i, j)] * inv_l2;
            }
            g_nv += alpha[j] * alpha[j] - inv[(j, j)];
        }
        Ok(Evaluation {
            value,
            grad: [0.5 * g_ls, 0.5 * g_sv, 0.5 * nv * g_nv],
        })
    }
}

/// Log marginal likelihood of `y` under a zero-mean GP with RBF kernel and
/// noise, plus its gradient with respect to
/// `(ln lengthscale, ln signal_variance, ln noise_variance)`.
pub fn gpr_log_ml(
    params: &KernelParams,
    noise_variance: f64,
    x: MatRef<'_, f64>,
    y: &[f64],
) -> Result<(f64, [f64; 3])> {
    if x.nrows() != y.len() {
        return Err(usage("gpr_log_ml: feature and target lengths differ"));
    }
    if x.nrows() == 0 {
        return Err(usage("gpr_log_ml: empty training set"));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(usage(format!("gpr_log_ml: noise variance must be positive, got {noise_variance}")));
    }
    let d2 = sq_distances_sym(x);
    let obj = Objective { d2: d2.as_ref(), y };
    let theta = [
        params.lengthscale().ln(),
        params.signal_variance().ln(),
        noise_variance.ln(),
    ];
    let e = obj.eval(theta)?;
    Ok((e.value, e.grad))
}

struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    fn around(median: f64) -> Self {
        Self {
            lo: [(median * 1e-3).ln(), 1e-4f64.ln(), 1e-8f64.ln()],
            hi: [(median * 1e3).ln(), 1e4f64.ln(), 10f64.ln()],
        }
    }

    fn clamp(&self, t: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| t[k].clamp(self.lo[k], self.hi[k]))
    }

    fn project(&self, t: [f64; 3], g: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| {
            if (t[k] <= self.lo[k] && g[k] < 0.0) || (t[k] >= self.hi[k] && g[k] > 0.0) {
                0.0
            } else {
                g[k]
            }
        })
    }
}

fn inf_norm(v: [f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Ascent {
    theta: [f64; 3],
    value: f64,
    improved: bool,
    converged: bool,
}

/// Projected gradient ascent with Barzilai-Borwein step proposals and an
/// Armijo backtracking line search.
fn ascend(obj: &Objective<'_>, start: [f64; 3], bounds: &Bounds, opts: &GprOptions) -> Result<Ascent> {
    let mut theta = bounds.clamp(start);
    let mut cur = obj.eval(theta)?;
    let mut pg = bounds.project(theta, cur.grad);
    let mut step = 0.5 / inf_norm(pg).max(1e-12);
    let mut improved = false;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let gnorm = inf_norm(pg);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = bounds.clamp([0, 1, 2].map(|k| theta[k] + t * pg[k]));
            let moved: f64 = (0..3).map(|k| pg[k] * (trial[k] - theta[k])).sum();
            if moved <= 0.0 {
                break;
            }
            if let Ok(v) = obj.value(trial) {
                if v >= cur.value + 1e-4 * moved {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        let next_eval = obj.eval(next)?;
        let s: [f64; 3] = [0, 1, 2].map(|k| next[k] - theta[k]);
        // ascent on f is descent on -f; BB1 step on the negated gradient
        let yv: [f64; 3] = [0, 1, 2].map(|k| cur.grad[k] - next_eval.grad[k]);
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e4) } else { (2.0 * t).min(1e4) };
        theta = next;
        cur = next_eval;
        pg = bounds.project(theta, cur.grad);
        improved = true;
    }
    if !converged && inf_norm(pg) < opts.grad_tol {
        converged = true;
    }
    Ok(Ascent {
        theta,
        value: cur.value,
        improved,
        converged,
    })
}

fn posterior(
    x: MatRef<'_, f64>,
    d2: MatRef<'_, f64>,
    ys: &[f64],
    scaler: TargetScaler,
    params: KernelParams,
    noise_variance: f64,
    warnings: Vec<String>,
) -> Result<GprModel> {
    let obj = Objective { d2, y: ys };
    let theta = [params.lengthscale().ln(), params.signal_variance().ln(), noise_variance.ln()];
    let (_, factor, alpha) = obj.factor(theta)?;
    let lml = obj.value_from(&factor, &alpha);
    Ok(GprModel {
        kernel_params: params,
        noise_variance,
        dual_weights: alpha,
        chol: factor,
        training_inputs: x.to_owned(),
        target_mean: scaler.mean,
        target_scale: scaler.scale,
        log_marginal_likelihood: lml,
        warnings,
    })
}

/// Fits the posterior for fixed hyperparameters (standardized-target units).
pub fn gpr_fit_fixed(
    x: MatRef<'_, f64>,
    y: &[f64],
    params: &KernelParams,
    noise_variance: f64,
) -> Result<GprModel> {
    let mut warnings = Vec::new();
    check_training(x, y, "gpr", &mut warnings)?;
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(usage(format!("gpr: noise variance must be positive, got {noise_variance}")));
    }
    let scaler = TargetScaler::fit(y, &mut warnings);
    let ys = scaler.apply(y);
    let d2 = sq_distances_sym(x);
    posterior(x, d2.as_ref(), &ys, scaler, *params, noise_variance, warnings)
}

/// Learns hyperparameters by maximizing the log marginal likelihood and
/// returns the resulting posterior.
///
/// Without `init`, the ascent is restarted from each lengthscale in
/// `opts.restart_factors` (times the median-distance heuristic, computed on
/// up to 500 rows subsampled with `seed`), with signal variance equal to the
/// standardized target variance and noise at `init_noise_fraction` of it.
/// With `init`, a single ascent starts from the given point.
pub fn gpr_train(
    x: MatRef<'_, f64>,
    y: &[f64],
    init: Option<GprHyper>,
    opts: &GprOptions,
    seed: u64,
) -> Result<GprModel> {
    let mut warnings = Vec::new();
    check_training(x, y, "gpr", &mut warnings)?;
    let scaler = TargetScaler::fit(y, &mut warnings);
    let ys = scaler.apply(y);
    let d2 = sq_distances_sym(x);
    let median = median_heuristic(x, MEDIAN_SUBSAMPLE, seed);
    let var = {
        let n = ys.len() as f64;
        let v = ys.iter().map(|v| v * v).sum::<f64>() / n;
        if v > 0.0 { v } else { 1.0 }
    };
    let starts: Vec<[f64; 3]> = match init {
        Some(h) => {
            if !(h.lengthscale > 0.0 && h.signal_variance > 0.0 && h.noise_variance > 0.0) {
                return Err(usage("gpr_train: initial hyperparameters must be positive"));
            }
            vec![[h.lengthscale.ln(), h.signal_variance.ln(), h.noise_variance.ln()]]
        }
        None => opts
            .restart_factors
            .iter()
            .map(|f| [(f * median).ln(), var.ln(), (opts.init_noise_fraction * var).ln()])
            .collect(),
    };
    let bounds = Bounds::around(median);
    let obj = Objective { d2: d2.as_ref(), y: &ys };

    let mut best: Option<Ascent> = None;
    let mut any_progress = false;
    let mut last_err = None;
    for start in &starts {
        match ascend(&obj, *start, &bounds, opts) {
            Ok(run) => {
                any_progress |= run.improved || run.converged;
                if best.as_ref().map_or(true, |b| run.value > b.value) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = match best {
        Some(b) => b,
        None => {
            return Err(last_err.unwrap_or_else(|| Error::Numerical("gpr_train: no restarts".into())));
        }
    };
    if !any_progress {
        let msg = "gpr_train: no restart improved on its initialization; using the best initial point".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let (ls, sv, nv) = hyper_from_log(best.theta);
    posterior(x, d2.as_ref(), &ys, scaler, KernelParams::new(ls, sv)?, nv, warnings)
}

/// Posterior mean and variance in target units. The variance includes the
/// noise term and is clamped at zero.
pub fn gpr_predict(model: &GprModel, xq: MatRef<'_, f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_query(model.training_inputs.as_ref(), xq, "gpr_predict")?;
    let kq = kernel_matrix(xq, model.training_inputs.as_ref(), &model.kernel_params)?;
    let mean = dual_predict(kq.as_ref(), &model.dual_weights, model.target_mean, model.target_scale);
    let mut v = kq.transpose().to_owned();
    model.chol.solve_lower_in_place(&mut v);
    let prior = model.kernel_params.signal_variance() + model.noise_variance;
    let s2 = model.target_scale * model.target_scale;
    let var = (0..xq.nrows())
        .map(|j| {
            let col = v.col(j);
            let explained: f64 = (0..col.nrows()).map(|i| col[i] * col[i]).sum();
            (prior - explained).max(0.0) * s2
        })
        .collect();
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn col_matrix(v: &[f64]) -> Matrix {
        Matrix::from_fn(v.len(), 1, |i, _| v[i])
    }

    #[test]
    fn scalar_log_ml() {
        let (s, noise, v) = (1.7, 0.3, 0.9);
        let params = KernelParams::new(1.0, s).unwrap();
        let (val, _) = gpr_log_ml(&params, noise, col_matrix(&[0.2]).as_ref(), &[v]).unwrap();
        let kn = s + noise;
        let expect = -0.5 * v * v / kn - 0.5 * kn.ln() - 0.5 * (2.0 * PI).ln();
        assert!((val - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_targets_have_no_data_fit_term() {
        let x = col_matrix(&[0.0, 0.7, 1.5]);
        let params = KernelParams::new(0.8, 1.2).unwrap();
        let (val, _) = gpr_log_ml(&params, 0.05, x.as_ref(), &[0.0; 3]).unwrap();
        let d2 = sq_distances_sym(x.as_ref());
        let mut k = kernel_from_sq_dist(d2.as_ref(), &params);
        for i in 0..3 {
            k[(i, i)] += 0.05;
        }
        let logdet = cholesky(k.as_ref()).unwrap().log_det();
        let expect = -0.5 * logdet - 1.5 * (2.0 * PI).ln();
        assert!((val - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = crate::seed::rng(3);
        for _ in 0..5 {
            let x = Matrix::from_fn(20, 2, |_, _| rng.random_range(-2.0..2.0));
            let y: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let theta = [rng.random_range(-0.5..1.0), rng.random_range(-0.5..0.5), rng.random_range(-3.0..-0.5)];
            let f = |t: [f64; 3]| {
                let p = KernelParams::new(t[0].exp(), t[1].exp()).unwrap();
                gpr_log_ml(&p, t[2].exp(), x.as_ref(), &y).unwrap()
            };
            let (_, g) = f(theta);
            for k in 0..3 {
                let h = 1e-5;
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += h;
                tm[k] -= h;
                let fd = (f(tp).0 - f(tm).0) / (2.0 * h);
                let rel = (g[k] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-5, "component {k}: analytic {} fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn noiseless_draw_learns_small_noise() {
        let mut rng = crate::seed::rng(21);
        let xs: Vec<f64> = (0..40).map(|_| rng.random_range(-4.0..4.0)).collect();
        let y: Vec<f64> = xs.iter().map(|x| (1.3 * x).sin() + 0.3 * x).collect();
        let m = gpr_train(col_matrix(&xs).as_ref(), &y, None, &GprOptions::default(), 0).unwrap();
        assert!(
            m.noise_variance <= 1e-3 * m.kernel_params.signal_variance(),
            "noise {} signal {}",
            m.noise_variance,
            m.kernel_params.signal_variance()
        );
    }

    #[test]
    fn refit_from_optimum_is_stationary() {
        let mut rng = crate::seed::rng(8);
        let x = Matrix::from_fn(30, 2, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..30).map(|i| x[(i, 0)].cos() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let opts = GprOptions::default();
        let m1 = gpr_train(x.as_ref(), &y, None, &opts, 1).unwrap();
        let m2 = gpr_train(x.as_ref(), &y, Some(m1.hyper()), &opts, 1).unwrap();
        assert!((m2.log_marginal_likelihood - m1.log_marginal_likelihood).abs() < 1e-6);
    }

    #[test]
    fn constant_targets_predict_constant() {
        let x = col_matrix(&[0.0, 1.0, 2.0, 3.0]);
        let m = gpr_train(x.as_ref(), &[4.2; 4], None, &GprOptions::default(), 0).unwrap();
        assert!(!m.warnings.is_empty());
        let (mean, _) = gpr_predict(&m, col_matrix(&[-3.0, 0.5, 10.0]).as_ref()).unwrap();
        for v in mean {
            assert!((v - 4.2).abs() < 1e-6);
        }
    }

    #[test]
    fn variance_limits() {
        let x = col_matrix(&[0.0, 1.0, 2.5]);
        let y = [0.3, -0.2, 1.0];
        let params = KernelParams::new(1.0, 1.5).unwrap();
        let m = gpr_fit_fixed(x.as_ref(), &y, &params, 1e-10).unwrap();
        let s2 = m.target_scale * m.target_scale;
        let (_, var) = gpr_predict(&m, x.as_ref()).unwrap();
        for v in &var {
            assert!(*v >= 0.0 && *v <= 1e-6 * 1.5 * s2, "{v}");
        }
        let m = gpr_fit_fixed(x.as_ref(), &y, &params, 0.2).unwrap();
        let (mean, var) = gpr_predict(&m, col_matrix(&[1e3]).as_ref()).unwrap();
        assert!((var[0] - (1.5 + 0.2) * s2).abs() < 1e-6);
        assert!((mean[0] - m.target_mean).abs() < 1e-6);
    }

    #[test]
    fn two_point_posterior_closed_form() {
        let (s, nv) = (1.0, 0.1);
        let m = gpr_fit_fixed(col_matrix(&[0.0, 1.0]).as_ref(), &[0.0, 1.0], &KernelParams::new(1.0, s).unwrap(), nv)
            .unwrap();
        // standardized targets (-1, 1), scale 0.5, mean 0.5
        let e = (-0.5f64).exp();
        let (a, b) = (s + nv, e);
        let det = a * a - b * b;
        let inv = [[a / det, -b / det], [-b / det, a / det]];
        let ys = [-1.0, 1.0];
        for q in [0.0, 0.4, 1.0, 2.0] {
            let k = [(-(q * q) / 2.0f64).exp(), (-((q - 1.0) * (q - 1.0)) / 2.0f64).exp()];
            let w = [inv[0][0] * ys[0] + inv[0][1] * ys[1], inv[1][0] * ys[0] + inv[1][1] * ys[1]];
            let mean = 0.5 + 0.5 * (k[0] * w[0] + k[1] * w[1]);
            let quad = k[0] * (inv[0][0] * k[0] + inv[0][1] * k[1]) + k[1] * (inv[1][0] * k[0] + inv[1][1] * k[1]);
            let var = 0.25 * (s - quad + nv);
            let (pm, pv) = gpr_predict(&m, col_matrix(&[q]).as_ref()).unwrap();
            assert!((pm[0] - mean).abs() < 1e-10);
            assert!((pv[0] - var).abs() < 1e-10);
        }
    }
}
