use crate::error::{GrowFragError, Result};
use crate::interp::MonotoneCubic;
use serde::{Deserialize, Serialize};

use super::growth::{covers, positive};

/// Division rate `b(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DivisionRate {
    /// Zero up to `mdiv`, then linear up to `bbar` at `M`.
    RampAboveThreshold { bbar: f64, mdiv: f64 },
    /// Monotone-cubic interpolation of samples covering [0, M].
    Tabulated(MonotoneCubic),
}

impl DivisionRate {
    pub(crate) fn validate(&self, max_mass: f64) -> Result<()> {
        match self {
            DivisionRate::RampAboveThreshold { bbar, mdiv } => {
                positive("division.bbar", *bbar)?;
                if !(*mdiv >= 0.0 && *mdiv < max_mass) {
                    return Err(GrowFragError::InvalidModel(format!("division.mdiv must lie in [0, M), got {mdiv}")));
                }
                Ok(())
            }
            DivisionRate::Tabulated(table) => {
                covers(table, 0.0, max_mass, "division table")?;
                if table.values().iter().any(|&v| v < 0.0) {
                    return Err(GrowFragError::InvalidModel("division rates must be non-negative".into()));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn eval(&self, x: f64, max_mass: f64) -> f64 {
        match self {
            DivisionRate::RampAboveThreshold { bbar, mdiv } => {
                if x <= *mdiv {
                    0.0
                } else {
                    bbar * ((x - mdiv) / (max_mass - mdiv)).min(1.0)
                }
            }
            DivisionRate::Tabulated(table) => table.eval_clamped(x).max(0.0),
        }
    }

    /// Upper bound `b̄` used as the thinning envelope.
    pub fn max_rate(&self) -> f64 {
        match self {
            DivisionRate::RampAboveThreshold { bbar, .. } => *bbar,
            DivisionRate::Tabulated(table) => table.values().iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Largest `m` such that `b` vanishes on [0, m].
    pub fn threshold(&self) -> f64 {
        match self {
            DivisionRate::RampAboveThreshold { mdiv, .. } => *mdiv,
            DivisionRate::Tabulated(table) => {
                let zeros = table.values().iter().take_while(|&&v| v == 0.0).count();
                if zeros == 0 {
                    0.0
                } else {
                    table.knots()[zeros - 1]
                }
            }
        }
    }

    /// Masses where `b` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            DivisionRate::RampAboveThreshold { mdiv, .. } => vec![*mdiv],
            DivisionRate::Tabulated(table) => table.knots().to_vec(),
        }
    }
}
