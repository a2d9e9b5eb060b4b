//! Synthetic reflectance surrogate.
//!
//! Each target variable `v` with range `[min, max]` is mapped to the unit
//! interval, `u = (v - min) / (max - min)`, and every band is
//!
//! ```text
//! rho_b = base_b + sum_v [ a_bv * exp(-c_v * u_v) + r_bv * u_v / (u_v + k_v) ] + noise
//! ```
//!
//! Even-numbered targets (0, 2, ...) use the pigment profile (strong
//! saturating response in the visible and red edge), odd-numbered targets the
//! canopy profile (soil masking in the visible, rational growth in the NIR).
//! Coefficients are tabulated at the 18 OLCI band centres from 442.5 to
//! 940 nm and linearly interpolated in wavelength for other band counts.

use super::Dataset;
use crate::error::{usage, Result};
use crate::seed;
use crate::Matrix;
use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

/// OLCI band centres (nm) between 443 and 940 nm.
pub const OLCI_WAVELENGTHS: [f64; 18] = [
    442.5, 490.0, 510.0, 560.0, 620.0, 665.0, 673.75, 681.25, 708.75, 753.75, 761.25, 764.375, 767.5, 778.75, 865.0,
    885.0, 900.0, 940.0,
];

const BASE: [f64; 18] = [
    0.030, 0.040, 0.050, 0.080, 0.060, 0.040, 0.040, 0.040, 0.100, 0.250, 0.250, 0.250, 0.260, 0.270, 0.300, 0.300,
    0.300, 0.280,
];
const PIGMENT_EXP: [f64; 18] = [
    0.020, 0.030, 0.050, 0.090, 0.070, 0.040, 0.035, 0.035, 0.080, 0.020, 0.010, 0.010, 0.010, 0.010, 0.000, 0.000,
    0.000, 0.000,
];
const PIGMENT_RAT: [f64; 18] = [
    -0.004, -0.004, -0.006, -0.010, -0.008, -0.005, -0.005, -0.005, -0.012, -0.004, -0.002, -0.002, -0.002, -0.002,
    0.000, 0.000, 0.000, 0.000,
];
const CANOPY_EXP: [f64; 18] = [
    0.080, 0.090, 0.090, 0.080, 0.100, 0.110, 0.110, 0.110, 0.090, 0.030, 0.030, 0.030, 0.030, 0.030, 0.020, 0.020,
    0.020, 0.020,
];
const CANOPY_RAT: [f64; 18] = [
    -0.010, -0.010, -0.010, 0.000, -0.020, -0.030, -0.030, -0.030, 0.050, 0.200, 0.210, 0.210, 0.210, 0.220, 0.250,
    0.250, 0.250, 0.230,
];
/// `(c_v, k_v)` for the pigment and canopy profiles.
const PIGMENT_SHAPE: (f64, f64) = (3.0, 0.30);
const CANOPY_SHAPE: (f64, f64) = (2.5, 0.35);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    /// Gaussian truncated to the variable's range.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub distribution: Distribution,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub sd: Option<f64>,
}

impl TargetSpec {
    pub fn uniform(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            distribution: Distribution::Uniform,
            mean: None,
            sd: None,
        }
    }

    pub fn gaussian(name: &str, min: f64, max: f64, mean: f64, sd: f64) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            distribution: Distribution::Gaussian,
            mean: Some(mean),
            sd: Some(sd),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(usage(format!("target '{}': range [{}, {}] is degenerate", self.name, self.min, self.max)));
        }
        if self.distribution == Distribution::Gaussian {
            match (self.mean, self.sd) {
                (Some(m), Some(s)) if m.is_finite() && s > 0.0 && s.is_finite() => {}
                _ => {
                    return Err(usage(format!(
                        "target '{}': gaussian distribution needs finite mean and positive sd",
                        self.name
                    )))
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            Distribution::Uniform => rng.random_range(self.min..=self.max),
            Distribution::Gaussian => {
                let normal = Normal::new(self.mean.unwrap_or(0.0), self.sd.unwrap_or(1.0)).expect("validated sd");
                loop {
                    let v = normal.sample(rng);
                    if v >= self.min && v <= self.max {
                        return v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    #[serde(default = "default_bands")]
    pub n_bands: usize,
    #[serde(default = "default_targets")]
    pub targets: Vec<TargetSpec>,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_bands() -> usize {
    18
}

fn default_noise() -> f64 {
    0.002
}

/// Leaf chlorophyll content and leaf area index with their LUT ranges.
fn default_targets() -> Vec<TargetSpec> {
    vec![
        TargetSpec::gaussian("LCC", 5.0, 75.0, 35.0, 30.0),
        TargetSpec::gaussian("LAI", 0.1, 7.0, 3.0, 2.0),
    ]
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            n_bands: default_bands(),
            targets: default_targets(),
            noise_sd: default_noise(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(usage("synthetic: n_samples must be at least 1"));
        }
        if self.n_bands == 0 {
            return Err(usage("synthetic: n_bands must be at least 1"));
        }
        if self.targets.is_empty() {
            return Err(usage("synthetic: at least one target variable is required"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(usage("synthetic: noise_sd must be non-negative"));
        }
        self.targets.iter().try_for_each(TargetSpec::validate)
    }
}

/// Band centres: OLCI for 18 bands, otherwise evenly spaced over 443-940 nm.
pub fn band_wavelengths(n_bands: usize) -> Vec<f64> {
    if n_bands == OLCI_WAVELENGTHS.len() {
        return OLCI_WAVELENGTHS.to_vec();
    }
    if n_bands == 1 {
        return vec![OLCI_WAVELENGTHS[0]];
    }
    let (lo, hi) = (OLCI_WAVELENGTHS[0], OLCI_WAVELENGTHS[17]);
    (0..n_bands).map(|i| lo + (hi - lo) * i as f64 / (n_bands - 1) as f64).collect()
}

fn interp(table: &[f64; 18], w: f64) -> f64 {
    let xs = &OLCI_WAVELENGTHS;
    if w <= xs[0] {
        return table[0];
    }
    for i in 1..xs.len() {
        if w <= xs[i] {
            let t = (w - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return table[i - 1] + t * (table[i] - table[i - 1]);
        }
    }
    table[17]
}

struct BandCoefficients {
    base: f64,
    exp: [f64; 2],
    rat: [f64; 2],
}

fn coefficients(w: f64) -> BandCoefficients {
    BandCoefficients {
        base: interp(&BASE, w),
        exp: [interp(&PIGMENT_EXP, w), interp(&CANOPY_EXP, w)],
        rat: [interp(&PIGMENT_RAT, w), interp(&CANOPY_RAT, w)],
    }
}

/// Draws targets from their distributions and maps them to noisy spectra.
pub fn synthetic_generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut target_rng = seed::rng(seed::derive(cfg.seed, 1));
    let mut noise_rng = seed::rng(seed::derive(cfg.seed, 2));
    let n = cfg.n_samples;
    let t = cfg.targets.len();
    let wavelengths = band_wavelengths(cfg.n_bands);
    let coefs: Vec<BandCoefficients> = wavelengths.iter().map(|&w| coefficients(w)).collect();

    let mut targets = Matrix::zeros(n, t);
    for i in 0..n {
        for (j, spec) in cfg.targets.iter().enumerate() {
            targets[(i, j)] = spec.draw(&mut target_rng);
        }
    }
    let noise = if cfg.noise_sd > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sd).expect("validated noise"))
    } else {
        None
    };
    let mut features = Matrix::zeros(n, cfg.n_bands);
    for i in 0..n {
        for (b, c) in coefs.iter().enumerate() {
            let mut rho = c.base;
            for (j, spec) in cfg.targets.iter().enumerate() {
                let u = (targets[(i, j)] - spec.min) / (spec.max - spec.min);
                let profile = j % 2;
                let (cv, kv) = if profile == 0 { PIGMENT_SHAPE } else { CANOPY_SHAPE };
                rho += c.exp[profile] * (-cv * u).exp() + c.rat[profile] * u / (u + kv);
            }
            if let Some(nd) = &noise {
                rho += nd.sample(&mut noise_rng);
            }
            features[(i, b)] = rho;
        }
    }
    let band_names = wavelengths.iter().map(|w| format!("R{}", w.round() as i64)).collect();
    let target_names = cfg.targets.iter().map(|s| s.name.clone()).collect();
    Dataset::new(features, targets, band_names, target_names)
}
