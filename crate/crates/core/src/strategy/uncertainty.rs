use super::{batch_from_positions, fallback, top_b, QueryBatch, StrategyConfig};
use crate::data::select_rows;
use crate::engine::PoolState;
use crate::error::Result;
use crate::regress::{krr_predict, KrrSpec, RegressorFactory};
use crate::seed;
use crate::Matrix;
use rand::Rng;

/// Smallest labeled set RSAL will score with.
pub const RSAL_MIN_LABELED: usize = 4;
/// Folds used for the RSAL out-of-fold residuals; row `i` is in fold `i % RSAL_FOLDS`.
pub const RSAL_FOLDS: usize = 5;

/// Population variance (divisor k) of a committee's predictions.
/// Exactly zero when all predictions are bitwise equal.
pub fn committee_variance(preds: &[f64]) -> f64 {
    if preds.iter().all(|p| p.to_bits() == preds[0].to_bits()) {
        return 0.0;
    }
    let k = preds.len() as f64;
    let mean = preds.iter().sum::<f64>() / k;
    preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / k
}

/// Histogram bins used by EQB for a committee of `k`.
pub fn eqb_bins(k: usize) -> usize {
    (k as f64).sqrt().ceil() as usize + 1
}

/// Entropy (nats) of the committee predictions histogrammed into `n_bins`
/// equal-width bins over their own range. A zero-width range has entropy 0.
pub fn binned_entropy(preds: &[f64], n_bins: usize) -> f64 {
    let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    if !(width > 0.0) || n_bins < 2 {
        return 0.0;
    }
    let mut counts = vec![0usize; n_bins];
    for &p in preds {
        let b = (((p - lo) / width) * n_bins as f64).floor() as usize;
        counts[b.min(n_bins - 1)] += 1;
    }
    let k = preds.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / k;
            -q * q.ln()
        })
        .sum()
}

/// Predictions on the candidate set from `pool_count` regressors, each
/// trained on a bootstrap resample of the labeled set. Row `p` of the result
/// holds member `p`'s predictions.
fn committee_predictions(
    state: &PoolState<'_>,
    cfg: &StrategyConfig,
    factory: &dyn RegressorFactory,
    warnings: &mut Vec<String>,
) -> Result<Vec<Vec<f64>>> {
    let xl = state.labeled_features();
    let yl = state.labeled_targets();
    let xc = state.candidate_features();
    let n = yl.len();
    let mut out = Vec::with_capacity(cfg.pool_count);
    for p in 0..cfg.pool_count {
        let member_seed = seed::derive(cfg.rng_seed, p as u64);
        let mut rng = seed::rng(member_seed);
        let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        rows.sort_unstable();
        out.push(fit_predict(factory, &xl, &yl, &rows, &xc, seed::derive(member_seed, 1), warnings)?);
    }
    Ok(out)
}

fn fit_predict(
    factory: &dyn RegressorFactory,
    xl: &Matrix,
    yl: &[f64],
    rows: &[usize],
    xc: &Matrix,
    fit_seed: u64,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let x = select_rows(xl.as_ref(), rows);
    let y: Vec<f64> = rows.iter().map(|&r| yl[r]).collect();
    let model = factory.fit(x.as_ref(), &y, fit_seed)?;
    for w in model.warnings() {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    model.predict(xc.as_ref())
}

fn out_of_fold(
    factory: &dyn RegressorFactory,
    xl: &Matrix,
    yl: &[f64],
    fit_seed: u64,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let n = yl.len();
    let folds = RSAL_FOLDS.min(n);
    let mut fitted = vec![0.0; n];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != k).collect();
        let held: Vec<usize> = (0..n).filter(|i| i % folds == k).collect();
        let xh = select_rows(xl.as_ref(), &held);
        let pred = fit_predict(factory, xl, yl, &train, &xh, seed::derive(fit_seed, k as u64), warnings)?;
        for (&i, p) in held.iter().zip(pred) {
            fitted[i] = p;
        }
    }
    Ok(fitted)
}

fn per_candidate(preds: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let m = preds.first().map_or(0, Vec::len);
    let mut column = vec![0.0; preds.len()];
    (0..m)
        .map(|i| {
            for (c, member) in column.iter_mut().zip(preds) {
                *c = member[i];
            }
            f(&column)
        })
        .collect()
}

fn committee_guard(state: &PoolState<'_>, cfg: &StrategyConfig) -> Option<QueryBatch> {
    let n = state.labeled().len();
    if n < cfg.pool_count.max(2) {
        return Some(fallback(
            state,
            cfg,
            format!("{n} labeled samples is fewer than the {} committee members", cfg.pool_count),
        ));
    }
    None
}

/// Candidates on which the committee disagrees most, by prediction variance.
pub fn pal_select(state: &PoolState<'_>, cfg: &StrategyConfig, factory: &dyn RegressorFactory) -> Result<QueryBatch> {
    cfg.validate()?;
    if let Some(b) = committee_guard(state, cfg) {
        return Ok(b);
    }
    let mut warnings = Vec::new();
    let preds = committee_predictions(state, cfg, factory, &mut warnings)?;
    let scores = per_candidate(&preds, committee_variance);
    let picks = top_b(&scores, cfg.batch_size);
    Ok(batch_from_positions(state, &picks, &scores, warnings))
}

/// Candidates whose committee predictions have the highest histogram entropy.
pub fn eqb_select(state: &PoolState<'_>, cfg: &StrategyConfig, factory: &dyn RegressorFactory) -> Result<QueryBatch> {
    cfg.validate()?;
    if let Some(b) = committee_guard(state, cfg) {
        return Ok(b);
    }
    let mut warnings = Vec::new();
    let preds = committee_predictions(state, cfg, factory, &mut warnings)?;
    let bins = eqb_bins(cfg.pool_count);
    let scores = per_candidate(&preds, |p| binned_entropy(p, bins));
    if scores.iter().all(|&h| h == 0.0) {
        let msg = "EQB: committee predictions identical for every candidate; selecting by index".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let picks = top_b(&scores, cfg.batch_size);
    Ok(batch_from_positions(state, &picks, &scores, warnings))
}

/// Candidates with the largest error predicted by a residual model.
///
/// The residual model is trained on the absolute out-of-fold residuals of
/// the main regressor over the labeled set: each labeled sample is predicted
/// by a model fitted without its fold. In-sample residuals of a kernel model
/// that nearly interpolates its training data are close to zero everywhere
/// and say little about where it generalizes badly.
pub fn rsal_select(
    state: &PoolState<'_>,
    cfg: &StrategyConfig,
    factory: &dyn RegressorFactory,
    residual: &KrrSpec,
) -> Result<QueryBatch> {
    cfg.validate()?;
    let n = state.labeled().len();
    if n < RSAL_MIN_LABELED {
        return Ok(fallback(state, cfg, format!("{n} labeled samples is too few for a residual model")));
    }
    let xl = state.labeled_features();
    let yl = state.labeled_targets();
    let mut warnings = Vec::new();
    let fitted = out_of_fold(factory, &xl, &yl, seed::derive(cfg.rng_seed, 0), &mut warnings)?;
    let resid: Vec<f64> = yl.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();

    let mean = yl.iter().sum::<f64>() / n as f64;
    let sd = (yl.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64).sqrt();
    let max_resid = resid.iter().copied().fold(0.0, f64::max);
    if sd == 0.0 || max_resid <= 1e-8 * sd {
        let mut b = fallback(state, cfg, format!("labeled-set residuals vanish (max {max_resid:.3e})"));
        warnings.append(&mut b.warnings);
        b.warnings = warnings;
        return Ok(b);
    }
    let (model, _) = residual.fit(xl.as_ref(), &resid, seed::derive(cfg.rng_seed, 1))?;
    warnings.extend(model.warnings.iter().cloned());
    let scores = krr_predict(&model, state.candidate_features().as_ref())?;
    let picks = top_b(&scores, cfg.batch_size);
    Ok(batch_from_positions(state, &picks, &scores, warnings))
}
