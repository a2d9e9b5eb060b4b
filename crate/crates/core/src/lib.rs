//! Pool-based active learning for kernel regression.
//!
//! The crate couples six query strategies (committee variance, entropy
//! query-by-bagging, residual regression, Euclidean, angular and
//! cluster-based diversity) plus a random baseline to kernel ridge
//! regression and Gaussian process regression, and drives them through a
//! batch active-learning protocol that records accuracy convergence curves.

pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod regress;
pub mod report;
pub mod seed;
pub mod strategy;

pub use error::{Error, Result};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = faer::Mat<f64>;
pub use faer::MatRef;
