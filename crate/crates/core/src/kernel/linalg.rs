use crate::error::{usage, Error, Result};
use crate::{Matrix, MatRef};
use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::Side;

/// Number of jittered attempts after the unjittered factorization fails.
pub const JITTER_RETRIES: usize = 6;
/// Multiplicative growth of the jitter between attempts.
pub const JITTER_GROWTH: f64 = 10.0;
const JITTER_START: f64 = 1e-10;

/// Cholesky factor `L` of `A + jitter_used * I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    llt: Llt<f64>,
    jitter_used: f64,
}

impl CholeskyFactor {
    pub fn lower(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    /// Solves `(A + jitter I) X = B`.
    pub fn solve(&self, b: MatRef<'_, f64>) -> Matrix {
        self.llt.solve(b)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Matrix::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(rhs.as_ref());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `L X = B` in place.
    pub fn solve_lower_in_place(&self, b: &mut Matrix) {
        self.llt.L().solve_lower_triangular_in_place(b.as_mut());
    }

    /// `log |A + jitter I|`.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `(A + jitter I)^-1`.
    pub fn inverse(&self) -> Matrix {
        self.llt.inverse()
    }
}

fn try_factor(a: MatRef<'_, f64>, jitter: f64) -> Option<Llt<f64>> {
    let llt = if jitter == 0.0 {
        a.llt(Side::Lower).ok()?
    } else {
        let mut shifted = a.to_owned();
        for i in 0..a.nrows() {
            shifted[(i, i)] += jitter;
        }
        shifted.llt(Side::Lower).ok()?
    };
    let l = llt.L();
    let ok = (0..l.nrows()).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite());
    ok.then_some(llt)
}

/// Factorizes the symmetric matrix `a` (lower triangle read), escalating a
/// diagonal jitter geometrically from `1e-10 * mean(diag)` when the plain
/// factorization fails.
pub fn cholesky(a: MatRef<'_, f64>) -> Result<CholeskyFactor> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(usage(format!("cholesky: matrix is {}x{}, not square", n, a.ncols())));
    }
    if n == 0 {
        return Err(usage("cholesky: empty matrix"));
    }
    for j in 0..n {
        for i in j..n {
            if !a[(i, j)].is_finite() {
                return Err(Error::Numerical(format!(
                    "cholesky: non-finite entry at ({i}, {j})"
                )));
            }
        }
    }
    if let Some(llt) = try_factor(a, 0.0) {
        return Ok(CholeskyFactor {
            llt,
            jitter_used: 0.0,
        });
    }
    let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
    let scale = if mean_diag.abs() > 0.0 { mean_diag.abs() } else { 1.0 };
    let mut jitter = JITTER_START * scale;
    for _ in 0..JITTER_RETRIES {
        if let Some(llt) = try_factor(a, jitter) {
            log::debug!("cholesky: n = {n} needed jitter {jitter:e}");
            return Ok(CholeskyFactor {
                llt,
                jitter_used: jitter,
            });
        }
        jitter *= JITTER_GROWTH;
    }
    let (dmin, dmax) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
        (lo.min(a[(i, i)]), hi.max(a[(i, i)]))
    });
    Err(Error::Numerical(format!(
        "cholesky failed for n = {n} at maximum jitter {:e} (diagonal range [{dmin:e}, {dmax:e}], mean {mean_diag:e})",
        jitter / JITTER_GROWTH
    )))
}

/// Solves `(A + jitter I) X = B` and returns the factor used.
pub fn chol_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<(Matrix, CholeskyFactor)> {
    if b.nrows() != a.nrows() {
        return Err(usage(format!(
            "chol_solve: right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    let factor = cholesky(a)?;
    let x = factor.solve(b);
    Ok((x, factor))
}
