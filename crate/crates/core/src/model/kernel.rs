use crate::error::{GrowFragError, Result};
use crate::interp::MonotoneCubic;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use super::growth::{covers, positive};

/// Density `q(α)` of the mass fraction inherited by one daughter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FragmentKernel {
    /// Beta(β, β) density; β = 1 is the uniform kernel.
    SymmetricBeta { beta: f64 },
    /// Monotone-cubic interpolation of samples covering [0, 1].
    Tabulated(MonotoneCubic),
}

impl FragmentKernel {
    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            FragmentKernel::SymmetricBeta { beta } => positive("kernel.beta", *beta),
            FragmentKernel::Tabulated(table) => {
                covers(table, 0.0, 1.0, "kernel table")?;
                if table.values().iter().any(|&v| v < 0.0) {
                    return Err(GrowFragError::InvalidModel("kernel density must be non-negative".into()));
                }
                Ok(())
            }
        }
    }

    /// Density at `alpha`; zero outside [0, 1].
    pub fn density(&self, alpha: f64) -> f64 {
        if !(0.0..=1.0).contains(&alpha) {
            return 0.0;
        }
        match self {
            FragmentKernel::SymmetricBeta { beta } => {
                let log_norm = ln_beta(*beta, *beta);
                if *beta == 1.0 {
                    return 1.0;
                }
                if alpha == 0.0 || alpha == 1.0 {
                    return if *beta > 1.0 { 0.0 } else { f64::INFINITY };
                }
                ((beta - 1.0) * (alpha.ln() + (1.0 - alpha).ln()) - log_norm).exp()
            }
            FragmentKernel::Tabulated(table) => table.eval_clamped(alpha).max(0.0),
        }
    }

    /// Largest value of the density, if finite.
    pub fn sup(&self) -> f64 {
        match self {
            FragmentKernel::SymmetricBeta { beta } if *beta >= 1.0 => self.density(0.5),
            FragmentKernel::SymmetricBeta { .. } => f64::INFINITY,
            FragmentKernel::Tabulated(table) => table.values().iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FragmentKernel::SymmetricBeta { beta } => {
                if *beta == 1.0 {
                    rng.random::<f64>()
                } else {
                    Beta::new(*beta, *beta).expect("validated beta parameter").sample(rng)
                }
            }
            FragmentKernel::Tabulated(_) => {
                let top = self.sup();
                loop {
                    let a: f64 = rng.random();
                    let u: f64 = rng.random();
                    if u * top < self.density(a) {
                        return a;
                    }
                }
            }
        }
    }
}
