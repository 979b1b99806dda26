use crate::error::{GrowFragError, Result};
use crate::interp::MonotoneCubic;
use serde::{Deserialize, Serialize};

/// Individual growth speed `g(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GrowthLaw {
    /// `g(x) = a x ln(M / x)`.
    Gompertz { a: f64 },
    /// `g(x) = a x (1 - (x / M)^theta)`.
    PowerLogistic { a: f64, theta: f64 },
    /// Monotone-cubic interpolation of samples covering [0, M].
    Tabulated(MonotoneCubic),
}

impl GrowthLaw {
    pub(crate) fn validate(&self, max_mass: f64) -> Result<()> {
        match self {
            GrowthLaw::Gompertz { a } => positive("growth.a", *a),
            GrowthLaw::PowerLogistic { a, theta } => {
                positive("growth.a", *a)?;
                positive("growth.theta", *theta)
            }
            GrowthLaw::Tabulated(table) => covers(table, 0.0, max_mass, "growth table"),
        }
    }

    pub(crate) fn eval(&self, x: f64, max_mass: f64) -> f64 {
        match self {
            GrowthLaw::Gompertz { a } => {
                if x <= 0.0 || x >= max_mass {
                    0.0
                } else {
                    a * x * (max_mass / x).ln()
                }
            }
            GrowthLaw::PowerLogistic { a, theta } => {
                if x <= 0.0 || x >= max_mass {
                    0.0
                } else {
                    a * x * (1.0 - (x / max_mass).powf(*theta))
                }
            }
            GrowthLaw::Tabulated(table) => table.eval_clamped(x),
        }
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GrowFragError::InvalidModel(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn covers(table: &MonotoneCubic, lo: f64, hi: f64, what: &str) -> Result<()> {
    let tol = 1e-12 * hi.abs().max(1.0);
    if table.x_min() > lo + tol || table.x_max() < hi - tol {
        return Err(GrowFragError::InvalidModel(format!(
            "{what} spans [{}, {}] but must cover [{lo}, {hi}]",
            table.x_min(),
            table.x_max()
        )));
    }
    Ok(())
}
