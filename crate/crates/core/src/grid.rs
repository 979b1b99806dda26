//! Discretisation of the mass interval (0, M).

use crate::error::{GrowFragError, Result};
use crate::quadrature::GaussLegendre;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridScheme {
    /// Cell-centred nodes `(i - 1/2) M / n` with equal weights `M / n`.
    #[serde(rename = "uniform-trapezoid", alias = "uniform")]
    Uniform,
    /// Equal panels, each carrying a 4-point Gauss–Legendre rule.
    #[serde(rename = "gauss-legendre-composite", alias = "gauss-legendre")]
    GaussLegendreComposite,
}

const GL_PANEL_ORDER: usize = 4;

/// Ordered interior nodes of (0, M) with positive quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scheme: GridScheme,
    max_mass: f64,
}

impl MassGrid {
    pub fn new(max_mass: f64, n: usize, scheme: GridScheme) -> Result<Self> {
        if !(max_mass > 0.0) || !max_mass.is_finite() {
            return Err(GrowFragError::InvalidArgument(format!("maximal mass must be positive, got {max_mass}")));
        }
        match scheme {
            GridScheme::Uniform => {
                if n < 2 {
                    return Err(GrowFragError::InvalidArgument("grid needs at least 2 nodes".into()));
                }
                let h = max_mass / n as f64;
                let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
                Ok(Self { nodes, weights: vec![h; n], scheme, max_mass })
            }
            GridScheme::GaussLegendreComposite => {
                if n < GL_PANEL_ORDER || !n.is_multiple_of(GL_PANEL_ORDER) {
                    return Err(GrowFragError::InvalidArgument(format!(
                        "gauss-legendre-composite grid size must be a positive multiple of {GL_PANEL_ORDER}, got {n}"
                    )));
                }
                let panels = n / GL_PANEL_ORDER;
                let gl = GaussLegendre::new(GL_PANEL_ORDER);
                let h = max_mass / panels as f64;
                let mut nodes = Vec::with_capacity(n);
                let mut weights = Vec::with_capacity(n);
                for p in 0..panels {
                    let lo = p as f64 * h;
                    for (x, w) in gl.on_interval(lo, lo + h) {
                        nodes.push(x);
                        weights.push(w);
                    }
                }
                Ok(Self { nodes, weights, scheme, max_mass })
            }
        }
    }

    pub fn uniform(max_mass: f64, n: usize) -> Result<Self> {
        Self::new(max_mass, n, GridScheme::Uniform)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn max_mass(&self) -> f64 {
        self.max_mass
    }

    /// Uniform spacing, if the grid is uniform.
    pub fn spacing(&self) -> Option<f64> {
        match self.scheme {
            GridScheme::Uniform => Some(self.max_mass / self.nodes.len() as f64),
            GridScheme::GaussLegendreComposite => None,
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }

    /// Weighted inner product `Σ w_i a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }
}
