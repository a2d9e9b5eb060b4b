//! RBF kernel evaluation, kernel-matrix assembly and SPD solves.

mod linalg;

pub use linalg::{chol_solve, cholesky, CholeskyFactor, JITTER_GROWTH, JITTER_RETRIES};

use crate::error::{usage, Result};
use crate::{Matrix, MatRef};
use faer::linalg::matmul::matmul;
use faer::{Accum, Par};

/// Hyperparameters of the isotropic RBF kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    lengthscale: f64,
    signal_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscale: f64, signal_variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(usage(format!("lengthscale must be positive, got {lengthscale}")));
        }
        if !(signal_variance > 0.0 && signal_variance.is_finite()) {
            return Err(usage(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        Ok(Self {
            lengthscale,
            signal_variance,
        })
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// Kernel value for a precomputed squared distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        self.signal_variance * (-sq_dist / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// `signal_variance * exp(-|x - z|^2 / (2 lengthscale^2))`.
pub fn rbf(x: &[f64], z: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != z.len() {
        return Err(usage(format!(
            "rbf: dimension mismatch ({} vs {})",
            x.len(),
            z.len()
        )));
    }
    if x.is_empty() {
        return Err(usage("rbf: zero-dimensional inputs"));
    }
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(params.eval_sq_dist(d2))
}

fn row_sq_norms(x: MatRef<'_, f64>) -> Vec<f64> {
    let mut norms = vec![0.0; x.nrows()];
    for j in 0..x.ncols() {
        let col = x.col(j);
        for (i, n) in norms.iter_mut().enumerate() {
            let v = col[i];
            *n += v * v;
        }
    }
    norms
}

fn check_dims(x: MatRef<'_, f64>, z: MatRef<'_, f64>, what: &str) -> Result<()> {
    if x.ncols() != z.ncols() {
        return Err(usage(format!(
            "{what}: dimension mismatch ({} vs {} columns)",
            x.ncols(),
            z.ncols()
        )));
    }
    Ok(())
}

/// Pairwise squared Euclidean distances between the rows of `x` and `z`,
/// computed as `|x|^2 + |z|^2 - 2<x, z>` with negative round-off clamped to 0.
pub fn sq_distances(x: MatRef<'_, f64>, z: MatRef<'_, f64>) -> Result<Matrix> {
    check_dims(x, z, "sq_distances")?;
    let nx = row_sq_norms(x);
    let nz = row_sq_norms(z);
    let mut out = Matrix::zeros(x.nrows(), z.nrows());
    matmul(out.as_mut(), Accum::Replace, x, z.transpose(), -2.0, Par::Seq);
    for j in 0..z.nrows() {
        for i in 0..x.nrows() {
            let v = out[(i, j)] + nx[i] + nz[j];
            out[(i, j)] = v.max(0.0);
        }
    }
    Ok(out)
}

/// Squared distances among the rows of `x`; exactly symmetric with a zero
/// diagonal.
pub fn sq_distances_sym(x: MatRef<'_, f64>) -> Matrix {
    let n = x.nrows();
    let norms = row_sq_norms(x);
    let mut out = Matrix::zeros(n, n);
    matmul(out.as_mut(), Accum::Replace, x, x.transpose(), -2.0, Par::Seq);
    for j in 0..n {
        out[(j, j)] = 0.0;
        for i in (j + 1)..n {
            let v = (out[(i, j)] + norms[i] + norms[j]).max(0.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Applies the kernel elementwise to a matrix of squared distances.
pub fn kernel_from_sq_dist(sq_dist: MatRef<'_, f64>, params: &KernelParams) -> Matrix {
    Matrix::from_fn(sq_dist.nrows(), sq_dist.ncols(), |i, j| {
        params.eval_sq_dist(sq_dist[(i, j)])
    })
}

fn same_matrix(x: MatRef<'_, f64>, z: MatRef<'_, f64>) -> bool {
    if x.nrows() != z.nrows() || x.ncols() != z.ncols() {
        return false;
    }
    (0..x.ncols()).all(|j| (0..x.nrows()).all(|i| x[(i, j)].to_bits() == z[(i, j)].to_bits()))
}

/// Kernel matrix with entry `(i, j) = rbf(x_i, z_j)`. When `x` and `z` hold
/// the same rows the result is exactly symmetric with diagonal
/// `signal_variance`.
pub fn kernel_matrix(x: MatRef<'_, f64>, z: MatRef<'_, f64>, params: &KernelParams) -> Result<Matrix> {
    check_dims(x, z, "kernel_matrix")?;
    let d2 = if same_matrix(x, z) {
        sq_distances_sym(x)
    } else {
        sq_distances(x, z)?
    };
    Ok(kernel_from_sq_dist(d2.as_ref(), params))
}

/// Median pairwise Euclidean distance among the given rows. Returns 1.0 when
/// fewer than two rows are given or every pair coincides.
pub fn median_distance(x: MatRef<'_, f64>, rows: &[usize]) -> f64 {
    let sub = Matrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]);
    let d2 = sq_distances_sym(sub.as_ref());
    let mut dists: Vec<f64> = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for j in 0..rows.len() {
        for i in (j + 1)..rows.len() {
            dists.push(d2[(i, j)].sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let med = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}
