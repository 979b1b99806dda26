use crate::characteristics::{Characteristic, MeshOptions};
use crate::error::{GrowFragError, Result};
use crate::grid::MassGrid;
use crate::model::ModelSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Nyström discretisation of the regularised birth operator
///
/// ```text
/// G f(x) = 2 ∫_0^∞ ∫_0^M [ b(A_t y)/A_t y · q(x / A_t y) + ε/M ] f(y)
///              e^{-∫_0^t (λ + b(A_s y) + ε) ds} dy dt
/// ```
///
/// on the grid, quadrature weights included: `(G f)(x_i) ≈ Σ_j K[i][j] f(y_j)`.
/// The death rate never enters; callers shift the eigenvalue by `-D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    pub n: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    pub lambda: f64,
    pub epsilon: f64,
}

impl OperatorMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// Matrix of the adjoint operator for the weighted inner product
    /// `⟨f, g⟩ = Σ w_i f_i g_i`, i.e. `W⁻¹ Kᵀ W`.
    pub fn adjoint(&self, weights: &[f64]) -> OperatorMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = weights[j] * self.get(j, i) / weights[i];
            }
        }
        OperatorMatrix { n, entries, lambda: self.lambda, epsilon: self.epsilon }
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Precomputed trajectory data so that each `(λ, ε)` assembly costs one
/// backward recursion per row.
pub struct OperatorAssembler {
    grid: MassGrid,
    max_mass: f64,
    ch: Characteristic,
    /// `kernel[i][k] = b(A_k)/A_k · q(x_i / A_k)` on the characteristic mesh.
    kernel: Vec<Vec<f64>>,
    ones: Vec<f64>,
}

impl OperatorAssembler {
    /// `min_rate` is the smallest `λ + ε` the assembler will be asked for;
    /// the mesh tail is long enough for `e^{-min_rate t}` to decay.
    pub fn new(spec: &ModelSpec, grid: &MassGrid, min_rate: f64) -> Result<Self> {
        let log_decay = (1e10f64).ln();
        let opts = MeshOptions {
            tail_rate: min_rate.max(0.0),
            tail_log_decay: log_decay,
            tail_cap: if min_rate > 0.0 { (log_decay / min_rate).min(1e4) } else { 1e4 },
            ..MeshOptions::default()
        };
        let ch = Characteristic::build(spec, grid.nodes(), opts)?;
        let kernel: Vec<Vec<f64>> = grid
            .nodes()
            .par_iter()
            .map(|&x| ch.masses().iter().map(|&a| spec.fragmentation_kernel(x, a)).collect())
            .collect();
        let ones = vec![1.0; ch.len()];
        Ok(Self { grid: grid.clone(), max_mass: spec.max_mass, ch, kernel, ones })
    }

    pub fn characteristic(&self) -> &Characteristic {
        &self.ch
    }

    pub fn grid(&self) -> &MassGrid {
        &self.grid
    }

    pub fn assemble(&self, lambda: f64, epsilon: f64) -> Result<OperatorMatrix> {
        if !(lambda >= 0.0) || !(epsilon >= 0.0) {
            return Err(GrowFragError::InvalidArgument(format!(
                "assembly needs λ ≥ 0 and ε ≥ 0, got λ = {lambda}, ε = {epsilon}"
            )));
        }
        let n = self.grid.len();
        let rate = lambda + epsilon;
        let w = self.grid.weights();
        let uniform_part: Vec<f64> = if epsilon > 0.0 {
            let tails = self.ch.tail_integrals(rate, &self.ones);
            (0..n).map(|j| epsilon / self.max_mass * self.ch.at_node(&tails, j)).collect()
        } else {
            vec![0.0; n]
        };
        let rows: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let tails = self.ch.tail_integrals(rate, &self.kernel[i]);
                (0..n)
                    .map(|j| {
                        let v = 2.0 * w[j] * (self.ch.at_node(&tails, j) + uniform_part[j]);
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(GrowFragError::numerical(
                                "operator assembly",
                                format!("non-finite entry at (i, j) = ({i}, {j})"),
                            ))
                        }
                    })
                    .collect()
            })
            .collect();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            entries.extend(row?);
        }
        Ok(OperatorMatrix { n, entries, lambda, epsilon })
    }
}

/// One-off assembly of the regularised operator at `(λ, ε)`.
pub fn assemble_operator(spec: &ModelSpec, grid: &MassGrid, lambda: f64, epsilon: f64) -> Result<OperatorMatrix> {
    OperatorAssembler::new(spec, grid, lambda + epsilon)?.assemble(lambda, epsilon)
}
