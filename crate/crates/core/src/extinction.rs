//! Extinction probability as the minimal fixed point of the monotone
//! first-event map.
//!
//! For an individual of mass `x`, conditioning on the first event gives
//!
//! ```text
//! p(x) = ∫ D e^{-Dt - H_x(t)} dt
//!      + ∫ b(A_t x) e^{-Dt - H_x(t)} ∫ q(α) p(α A_t x) p((1-α) A_t x) dα dt
//! ```
//!
//! where `H_x` is the cumulative division hazard along the flow. Iterating
//! from `p ≡ 0` produces the probabilities of extinction before the n-th
//! generation, which increase to the extinction probability.

use crate::characteristics::{Characteristic, MeshOptions};
use crate::error::{GrowFragError, Result};
use crate::grid::MassGrid;
use crate::interp::MonotoneCubic;
use crate::model::ModelSpec;
use crate::quadrature::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
const TAIL_TOL: f64 = 1e-10;
const ALPHA_NODES: usize = 32;
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionProfile {
    pub grid: MassGrid,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the last Picard update.
    pub residual: f64,
    pub converged: bool,
    /// Largest decrease seen between consecutive iterates (0 when monotone).
    pub monotonicity_violation: f64,
    /// Stored iterates `p_n`, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub generation_curves: Vec<Vec<f64>>,
}

impl ExtinctionProfile {
    pub fn constant(grid: &MassGrid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
            iterations: 0,
            residual: f64::INFINITY,
            converged: false,
            monotonicity_violation: 0.0,
            generation_curves: Vec::new(),
        }
    }

    /// Survival probability `1 - p(x)` by monotone interpolation.
    pub fn extinction_at(&self, x: f64) -> f64 {
        let xs = self.grid.nodes();
        if xs.len() < 2 {
            return self.values[0];
        }
        MonotoneCubic::new(xs.to_vec(), self.values.clone()).map(|c| c.eval_clamped(x)).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Constant starting value; 0 yields the minimal solution.
    pub start: f64,
    pub keep_generations: bool,
}

impl Default for ExtinctionOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, start: 0.0, keep_generations: false }
    }
}

/// Precomputed characteristic and α-quadrature for repeated Picard steps.
pub struct PicardMap {
    spec: ModelSpec,
    grid: MassGrid,
    ch: Characteristic,
    alpha: Vec<(f64, f64)>,
    /// Extinction probability of a mass-0 individual: it never divides, so it
    /// dies surely when D > 0 and lives forever otherwise.
    anchor: f64,
}

impl PicardMap {
    pub fn new(spec: &ModelSpec, grid: &MassGrid) -> Result<Self> {
        let d = spec.death_rate;
        let log_decay = (1.0 / TAIL_TOL).ln();
        let opts = MeshOptions {
            tail_rate: d,
            tail_log_decay: log_decay,
            tail_cap: if d > 0.0 { log_decay / d } else { 1e3 },
            ..MeshOptions::default()
        };
        let ch = Characteristic::build(spec, grid.nodes(), opts)?;
        let gl = GaussLegendre::new(ALPHA_NODES);
        let alpha: Vec<(f64, f64)> = gl.on_interval(0.0, 1.0).map(|(a, w)| (a, w * spec.kernel.density(a))).collect();
        let anchor = if d > 0.0 { 1.0 } else { 0.0 };
        Ok(Self { spec: spec.clone(), grid: grid.clone(), ch, alpha, anchor })
    }

    pub fn characteristic(&self) -> &Characteristic {
        &self.ch
    }

    /// One application of the first-event map.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.grid.len() {
            return Err(GrowFragError::InvalidArgument(format!(
                "profile has {} values, grid has {} nodes",
                p.len(),
                self.grid.len()
            )));
        }
        if let Some(bad) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(GrowFragError::InvalidArgument(format!(
                "profile value {} at node {bad} outside [0, 1]",
                p[bad]
            )));
        }
        let mut xs = Vec::with_capacity(p.len() + 1);
        let mut ys = Vec::with_capacity(p.len() + 1);
        xs.push(0.0);
        ys.push(self.anchor);
        xs.extend_from_slice(self.grid.nodes());
        ys.extend_from_slice(p);
        let interp = MonotoneCubic::new(xs, ys)?;
        let d = self.spec.death_rate;
        let integrand: Vec<f64> = self
            .ch
            .masses()
            .par_iter()
            .map(|&mass| {
                let b = self.spec.division_rate(mass);
                if b == 0.0 {
                    return d;
                }
                let inner: f64 = self
                    .alpha
                    .iter()
                    .map(|&(a, wq)| wq * interp.eval_clamped(a * mass) * interp.eval_clamped((1.0 - a) * mass))
                    .sum();
                d + b * inner
            })
            .collect();
        let tails = self.ch.tail_integrals(d, &integrand);
        let mut out = Vec::with_capacity(p.len());
        for j in 0..self.grid.len() {
            let v = self.ch.at_node(&tails, j);
            if !v.is_finite() {
                return Err(GrowFragError::numerical(
                    "picard step",
                    format!("non-finite quadrature at node {j} (x = {})", self.grid.nodes()[j]),
                ));
            }
            out.push(v.clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

/// Applies one Picard update to `p`.
pub fn picard_step(spec: &ModelSpec, grid: &MassGrid, p: &ExtinctionProfile) -> Result<ExtinctionProfile> {
    let map = PicardMap::new(spec, grid)?;
    let next = map.apply(&p.values)?;
    let residual = sup_diff(&next, &p.values);
    let violation = p.values.iter().zip(&next).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max);
    Ok(ExtinctionProfile {
        grid: grid.clone(),
        values: next,
        iterations: p.iterations + 1,
        residual,
        converged: false,
        monotonicity_violation: violation,
        generation_curves: Vec::new(),
    })
}

/// Iterates the Picard map from a constant start until the sup-norm update
/// drops below `tol`. Reaching `max_iter` returns the partial result with
/// `converged = false`.
pub fn solve_extinction(spec: &ModelSpec, grid: &MassGrid, opts: ExtinctionOptions) -> Result<ExtinctionProfile> {
    if !(opts.tol > 0.0) {
        return Err(GrowFragError::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(0.0..=1.0).contains(&opts.start) {
        return Err(GrowFragError::InvalidArgument("start value must lie in [0, 1]".into()));
    }
    let map = PicardMap::new(spec, grid)?;
    let mut p = vec![opts.start; grid.len()];
    let mut generations = Vec::new();
    if opts.keep_generations {
        generations.push(p.clone());
    }
    let mut residual = f64::INFINITY;
    let mut violation = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let next = map.apply(&p)?;
        iterations += 1;
        residual = sup_diff(&next, &p);
        if opts.start == 0.0 {
            let drop = p.iter().zip(&next).map(|(a, b)| a - b).fold(0.0, f64::max);
            if drop > MONOTONE_SLACK {
                violation = violation.max(drop);
            }
        }
        p = next;
        if opts.keep_generations {
            generations.push(p.clone());
        }
        if residual < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(ExtinctionProfile {
        grid: grid.clone(),
        values: p,
        iterations,
        residual,
        converged,
        monotonicity_violation: violation,
        generation_curves: generations,
    })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    SurvivalPossible,
    ExtinctionCertain,
    /// Some nodes below and some above `1 - margin`; the exact solution never
    /// mixes, so this flags numerical trouble.
    Inconclusive,
}

pub fn dichotomy(profile: &ExtinctionProfile, margin: f64) -> Dichotomy {
    let cut = 1.0 - margin;
    if profile.values.iter().all(|&p| p < cut) {
        Dichotomy::SurvivalPossible
    } else if profile.values.iter().all(|&p| p > cut) {
        Dichotomy::ExtinctionCertain
    } else {
        Dichotomy::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::MonotoneCubic;
    use crate::model::{DivisionRate, FragmentKernel, GrowthLaw};

    fn no_division(d: f64) -> ModelSpec {
        let xs = vec![0.0, 0.5, 1.0];
        ModelSpec::new(
            GrowthLaw::Gompertz { a: 1.0 },
            DivisionRate::Tabulated(MonotoneCubic::new(xs, vec![0.0; 3]).unwrap()),
            FragmentKernel::SymmetricBeta { beta: 2.0 },
            d,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn no_death_keeps_zero_profile() {
        let spec = ModelSpec::reference(0.0);
        let grid = MassGrid::uniform(1.0, 40).unwrap();
        let out = picard_step(&spec, &grid, &ExtinctionProfile::constant(&grid, 0.0)).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_division_means_certain_death() {
        let spec = no_division(0.7);
        let grid = MassGrid::uniform(1.0, 40).unwrap();
        let out = picard_step(&spec, &grid, &ExtinctionProfile::constant(&grid, 0.0)).unwrap();
        assert!(out.values.iter().all(|&v| (v - 1.0).abs() < 1e-8), "{:?}", &out.values[..3]);
        let solved = solve_extinction(&spec, &grid, ExtinctionOptions::default()).unwrap();
        assert!(solved.converged);
        assert!(solved.iterations <= 2);
        assert_eq!(dichotomy(&solved, 1e-3), Dichotomy::ExtinctionCertain);
    }

    #[test]
    fn one_is_a_fixed_point() {
        let spec = ModelSpec::reference(0.5);
        let grid = MassGrid::uniform(1.0, 60).unwrap();
        let out = picard_step(&spec, &grid, &ExtinctionProfile::constant(&grid, 1.0)).unwrap();
        let worst = out.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn mixed_profile_is_inconclusive() {
        let grid = MassGrid::uniform(1.0, 4).unwrap();
        let mut p = ExtinctionProfile::constant(&grid, 1.0);
        p.values = vec![0.3, 0.4, 1.0, 1.0];
        assert_eq!(dichotomy(&p, 1e-3), Dichotomy::Inconclusive);
    }

    #[test]
    fn rejects_out_of_range_input() {
        let spec = ModelSpec::reference(0.5);
        let grid = MassGrid::uniform(1.0, 10).unwrap();
        let bad = ExtinctionProfile::constant(&grid, 1.5);
        assert!(picard_step(&spec, &grid, &bad).is_err());
        assert!(solve_extinction(&spec, &grid, ExtinctionOptions { tol: 0.0, ..Default::default() }).is_err());
    }
}
