use super::Dataset;
use crate::error::{usage, Result};
use crate::seed;
use crate::Matrix;
use rand::seq::SliceRandom;

/// Shuffled `(learning, validation)` row indices: the first
/// `floor(n * learn_fraction)` rows of the permutation go to learning.
pub fn split_indices(n: usize, learn_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(learn_fraction > 0.0 && learn_fraction < 1.0) {
        return Err(usage(format!("split fraction must lie in (0, 1), got {learn_fraction}")));
    }
    let n_learn = (n as f64 * learn_fraction).floor() as usize;
    if n_learn == 0 || n_learn >= n {
        return Err(usage(format!(
            "split of {n} samples at fraction {learn_fraction} leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let validation = perm.split_off(n_learn);
    Ok((perm, validation))
}

pub fn split(ds: &Dataset, learn_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (learn, val) = split_indices(ds.n_samples(), learn_fraction, seed)?;
    Ok((ds.select_rows(&learn), ds.select_rows(&val)))
}

/// Per-band affine transform fitted on learning data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero-SD bands keep scale 1 and are reported in the returned warnings.
    pub fn fit(ds: &Dataset) -> (Self, Vec<String>) {
        let f = ds.features();
        let n = f.nrows() as f64;
        let mut warnings = Vec::new();
        let mut mean = Vec::with_capacity(f.ncols());
        let mut scale = Vec::with_capacity(f.ncols());
        for j in 0..f.ncols() {
            let m = (0..f.nrows()).map(|i| f[(i, j)]).sum::<f64>() / n;
            let var = (0..f.nrows()).map(|i| (f[(i, j)] - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            if sd > 1e-12 * m.abs().max(1.0) {
                scale.push(sd);
            } else {
                let msg = format!("band '{}' is constant; centred but not scaled", ds.band_names()[j]);
                log::warn!("{msg}");
                warnings.push(msg);
                scale.push(1.0);
            }
        }
        (Self { mean, scale }, warnings)
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let f = ds.features();
        ds.with_features(Matrix::from_fn(f.nrows(), f.ncols(), |i, j| (f[(i, j)] - self.mean[j]) / self.scale[j]))
    }

    pub fn inverse(&self, ds: &Dataset) -> Dataset {
        let f = ds.features();
        ds.with_features(Matrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] * self.scale[j] + self.mean[j]))
    }
}

/// Fits per-band statistics on `learning` only and applies them to both sets.
pub fn standardize_fit_apply(learning: &Dataset, validation: &Dataset) -> (Dataset, Dataset, Standardizer, Vec<String>) {
    let (st, warnings) = Standardizer::fit(learning);
    (st.apply(learning), st.apply(validation), st, warnings)
}
