use crate::error::Result;
use crate::kernel::KernelParams;
use crate::regress::{gpr_fit_fixed, gpr_train, krr_train, GprHyper, GprOptions, KrrSpec, Regressor, RegressorFactory};
use crate::MatRef;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Krr,
    Gpr,
}

impl RegressorKind {
    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Krr => "krr",
            RegressorKind::Gpr => "gpr",
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A regressor family with its hyperparameter-selection recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub krr: KrrSpec,
    pub gpr: GprOptions,
}

impl RegressorSpec {
    pub fn krr(spec: KrrSpec) -> Self {
        Self {
            kind: RegressorKind::Krr,
            krr: spec,
            gpr: GprOptions::default(),
        }
    }

    pub fn gpr(opts: GprOptions) -> Self {
        Self {
            kind: RegressorKind::Gpr,
            krr: KrrSpec::default(),
            gpr: opts,
        }
    }
}

/// Always selects hyperparameters afresh: CV tuning for KRR, marginal
/// likelihood ascent for GPR.
impl RegressorFactory for RegressorSpec {
    fn fit(&self, x: MatRef<'_, f64>, y: &[f64], seed: u64) -> Result<Box<dyn Regressor>> {
        Ok(match self.kind {
            RegressorKind::Krr => Box::new(self.krr.fit(x, y, seed)?.0),
            RegressorKind::Gpr => Box::new(gpr_train(x, y, None, &self.gpr, seed)?),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Learned {
    Krr { params: KernelParams, lambda: f64 },
    Gpr(GprHyper),
}

/// Main-model trainer that can reuse the last selected hyperparameters.
pub(crate) struct Trainer<'a> {
    spec: &'a RegressorSpec,
    last: Option<Learned>,
}

impl<'a> Trainer<'a> {
    pub fn new(spec: &'a RegressorSpec) -> Self {
        Self { spec, last: None }
    }

    /// Retunes when asked to (or when nothing has been learned yet).
    pub fn fit(&mut self, x: MatRef<'_, f64>, y: &[f64], seed: u64, retune: bool) -> Result<Box<dyn Regressor>> {
        match (retune, self.last) {
            (false, Some(Learned::Krr { params, lambda })) => Ok(Box::new(krr_train(x, y, &params, lambda)?)),
            (false, Some(Learned::Gpr(h))) => Ok(Box::new(gpr_fit_fixed(
                x,
                y,
                &KernelParams::new(h.lengthscale, h.signal_variance)?,
                h.noise_variance,
            )?)),
            _ => match self.spec.kind {
                RegressorKind::Krr => {
                    let (model, tuned) = self.spec.krr.fit(x, y, seed)?;
                    self.last = Some(Learned::Krr {
                        params: tuned.params,
                        lambda: tuned.ridge_lambda,
                    });
                    Ok(Box::new(model))
                }
                RegressorKind::Gpr => {
                    let model = gpr_train(x, y, None, &self.spec.gpr, seed)?;
                    self.last = Some(Learned::Gpr(model.hyper()));
                    Ok(Box::new(model))
                }
            },
        }
    }
}
