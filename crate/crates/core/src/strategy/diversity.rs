use super::kmeans::kmeans;
use super::{batch_from_positions, top_b, BatchMode, QueryBatch, StrategyConfig};
use crate::engine::PoolState;
use crate::error::{usage, Result};
use crate::MatRef;

pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Angle in `[0, pi]` between two vectors; 0 if either has zero norm.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    match (unit(a), unit(b)) {
        (Some(u), Some(v)) => unit_angle(&u, &v),
        _ => 0.0,
    }
}

fn unit(a: &[f64]) -> Option<Vec<f64>> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| a.iter().map(|v| v / norm).collect())
}

/// `2 atan2(|u - v|, |u + v|)`, accurate near 0 and pi unlike `acos(u.v)`.
fn unit_angle(u: &[f64], v: &[f64]) -> f64 {
    let diff = sq_euclidean(u, v).sqrt();
    let sum = u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
    2.0 * diff.atan2(sum)
}

fn rows(m: MatRef<'_, f64>, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Batch selection given each candidate's distance to the labeled set and a
/// candidate-to-candidate distance for provisional additions.
fn diversity_batch(
    mut score: Vec<f64>,
    b: usize,
    mode: BatchMode,
    pair: impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<f64>) {
    let b = b.min(score.len());
    if mode == BatchMode::Static {
        let picks = top_b(&score, b);
        let s = picks.iter().map(|&p| score[p]).collect();
        return (picks, s);
    }
    let mut taken = vec![false; score.len()];
    let (mut picks, mut picked) = (Vec::with_capacity(b), Vec::with_capacity(b));
    for _ in 0..b {
        let mut best: Option<usize> = None;
        for i in 0..score.len() {
            if !taken[i] && best.is_none_or(|j| score[i] > score[j]) {
                best = Some(i);
            }
        }
        let j = best.expect("b is capped by the candidate count");
        taken[j] = true;
        picks.push(j);
        picked.push(score[j]);
        for i in 0..score.len() {
            if !taken[i] {
                score[i] = score[i].min(pair(i, j));
            }
        }
    }
    (picks, picked)
}

fn require_labeled(state: &PoolState<'_>, what: &str) -> Result<()> {
    if state.labeled().is_empty() {
        return Err(usage(format!("{what}: the labeled set is empty")));
    }
    Ok(())
}

/// Candidates farthest (minimum squared Euclidean distance) from the labeled set.
pub fn ebd_select(state: &PoolState<'_>, cfg: &StrategyConfig) -> Result<QueryBatch> {
    cfg.validate()?;
    require_labeled(state, "EBD")?;
    let x = state.features();
    let lab = rows(x, state.labeled());
    let cand = rows(x, state.candidates());
    let score = cand
        .iter()
        .map(|c| lab.iter().map(|l| sq_euclidean(c, l)).fold(f64::INFINITY, f64::min))
        .collect();
    let (picks, scores) = diversity_batch(score, cfg.batch_size, cfg.batch_mode, |i, j| sq_euclidean(&cand[i], &cand[j]));
    Ok(finish(state, picks, scores, Vec::new()))
}

/// Candidates with the largest minimum angle to the labeled set.
pub fn abd_select(state: &PoolState<'_>, cfg: &StrategyConfig) -> Result<QueryBatch> {
    cfg.validate()?;
    require_labeled(state, "ABD")?;
    let x = state.features();
    let lab: Vec<Option<Vec<f64>>> = rows(x, state.labeled()).iter().map(|r| unit(r)).collect();
    let cand: Vec<Option<Vec<f64>>> = rows(x, state.candidates()).iter().map(|r| unit(r)).collect();
    let mut warnings = Vec::new();
    let zero_c = cand.iter().filter(|c| c.is_none()).count();
    let zero_l = lab.iter().filter(|c| c.is_none()).count();
    if zero_c + zero_l > 0 {
        let msg = format!("ABD: {zero_c} candidate and {zero_l} labeled zero-norm vectors given angle 0");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let pair = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| match (a, b) {
        (Some(u), Some(v)) => unit_angle(u, v),
        _ => 0.0,
    };
    let score = cand.iter().map(|c| lab.iter().map(|l| pair(c, l)).fold(f64::INFINITY, f64::min)).collect();
    let (picks, scores) = diversity_batch(score, cfg.batch_size, cfg.batch_mode, |i, j| pair(&cand[i], &cand[j]));
    Ok(finish(state, picks, scores, warnings))
}

/// One candidate per k-means cluster (k = batch size): the member nearest
/// the cluster centroid. Scores are those squared distances.
pub fn cbd_select(state: &PoolState<'_>, cfg: &StrategyConfig) -> Result<QueryBatch> {
    cfg.validate()?;
    let n_cand = state.candidates().len();
    if n_cand <= cfg.batch_size {
        let all: Vec<usize> = (0..n_cand).collect();
        return Ok(batch_from_positions(state, &all, &vec![0.0; n_cand], Vec::new()));
    }
    let xc = state.candidate_features();
    let km = kmeans(xc.as_ref(), cfg.batch_size, cfg.rng_seed)?;
    let cand = rows(xc.as_ref(), &(0..n_cand).collect::<Vec<_>>());
    let mut best: Vec<Option<(usize, f64)>> = vec![None; cfg.batch_size];
    for (i, &c) in km.assignments.iter().enumerate() {
        let centre: Vec<f64> = (0..xc.ncols()).map(|j| km.centroids[(c, j)]).collect();
        let d = sq_euclidean(&cand[i], &centre);
        if best[c].is_none_or(|(_, bd)| d < bd) {
            best[c] = Some((i, d));
        }
    }
    let (picks, scores): (Vec<usize>, Vec<f64>) = best.into_iter().flatten().unzip();
    Ok(finish(state, picks, scores, Vec::new()))
}

fn finish(state: &PoolState<'_>, picks: Vec<usize>, scores: Vec<f64>, warnings: Vec<String>) -> QueryBatch {
    let cand = state.candidates();
    QueryBatch {
        indices: picks.iter().map(|&p| cand[p]).collect(),
        scores,
        warnings,
    }
}
