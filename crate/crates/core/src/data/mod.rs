//! Datasets: LUT ingestion, synthetic surrogate generation, splitting and
//! feature standardization.

mod lut;
mod prep;
mod synthetic;

pub use lut::{load_lut, read_lut, save_lut, write_lut};
pub(crate) use lut::fmt_real;
pub use prep::{split, split_indices, standardize_fit_apply, Standardizer};
pub use synthetic::{
    band_wavelengths, synthetic_generate, Distribution, SyntheticConfig, TargetSpec, OLCI_WAVELENGTHS,
};

use crate::error::{usage, Error, Result};
use crate::{Matrix, MatRef};

/// Spectral features paired with biophysical target variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    targets: Matrix,
    band_names: Vec<String>,
    target_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        targets: Matrix,
        band_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(usage("dataset has no samples"));
        }
        if features.nrows() != targets.nrows() {
            return Err(usage(format!(
                "dataset has {} feature rows but {} target rows",
                features.nrows(),
                targets.nrows()
            )));
        }
        if features.ncols() != band_names.len() || targets.ncols() != target_names.len() {
            return Err(usage("dataset column counts do not match their labels"));
        }
        for (m, names) in [(&features, &band_names), (&targets, &target_names)] {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if !m[(i, j)].is_finite() {
                        return Err(Error::Data(format!(
                            "non-finite value at row {i}, column '{}'",
                            names[j]
                        )));
                    }
                }
            }
        }
        Ok(Self {
            features,
            targets,
            band_names,
            target_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_bands(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> MatRef<'_, f64> {
        self.features.as_ref()
    }

    pub fn targets(&self) -> MatRef<'_, f64> {
        self.targets.as_ref()
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn target_index(&self, name: &str) -> Result<usize> {
        self.target_names
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| usage(format!("unknown target variable '{name}'")))
    }

    /// One target column by name.
    pub fn target(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.target_index(name)?;
        Ok((0..self.n_samples()).map(|i| self.targets[(i, j)]).collect())
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: select_rows(self.features.as_ref(), rows),
            targets: select_rows(self.targets.as_ref(), rows),
            band_names: self.band_names.clone(),
            target_names: self.target_names.clone(),
        }
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            targets: self.targets.clone(),
            band_names: self.band_names.clone(),
            target_names: self.target_names.clone(),
        }
    }
}

pub(crate) fn select_rows(m: MatRef<'_, f64>, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}
