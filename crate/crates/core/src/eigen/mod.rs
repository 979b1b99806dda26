//! Principal eigenvalue `Λ` of the growth-fragmentation operator and its
//! eigenfunctions.
//!
//! The solver works with the death rate set to zero and reports
//! `Λ = Λ₀ - D`. For a regularisation `ε > 0` the birth operator `G^ε_λ` is
//! strictly positive; its Perron eigenvalue `μ(λ)` falls from 2 (λ → 0) to 0
//! (λ → ∞), and `Λ_ε` is the root of `μ(λ) = 1`. Driving `ε → 0` gives `Λ₀`
//! and the birth density `Ψ`, from which the stationary profile `u` is
//! rebuilt by integrating along characteristics. The reproductive value `φ`
//! is the Perron vector of the adjoint operator.

mod operator;
mod power;

pub use operator::{assemble_operator, OperatorAssembler, OperatorMatrix};
pub use power::{dominant_eigen, dominant_eigen_with_limit, DominantPair};

use crate::error::{GrowFragError, Result};
use crate::grid::MassGrid;
use crate::interp::MonotoneCubic;
use crate::model::ModelSpec;
use crate::quadrature::fitted_trapezoid_weights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Strictly decreasing regularisation levels.
    pub epsilon_schedule: Vec<f64>,
    /// Acceptance threshold on `|Λ_{ε_k} - Λ_{ε_{k+1}}|`.
    pub lambda_tol: f64,
    /// Target for `|μ(Λ_ε) - 1|` in the bisection.
    pub mu_tol: f64,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub bisection_max_iter: usize,
    /// Acceptance threshold on the relative sup change of `φ` between the
    /// last two regularisation levels.
    pub phi_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            epsilon_schedule: (1..=7).map(|k| 10f64.powi(-k)).collect(),
            lambda_tol: 1e-5,
            mu_tol: 1e-11,
            power_tol: 1e-13,
            power_max_iter: power::DEFAULT_MAX_ITER,
            bisection_max_iter: 100,
            phi_tol: 1e-3,
        }
    }
}

/// Lower end of the bisection bracket.
pub const LAMBDA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRoot {
    pub lambda: f64,
    pub mu: f64,
    /// Fixed point `Ψ_ε`, max-normalised.
    pub psi: Vec<f64>,
    /// `(λ, μ(λ))` pairs in evaluation order.
    pub mu_trace: Vec<(f64, f64)>,
    /// Whether μ decreased with λ along the trace.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub grid: MassGrid,
    /// Reported eigenvalue `Λ = Λ₀ - D`.
    pub lambda: f64,
    /// Eigenvalue of the problem without death.
    pub lambda0: f64,
    pub death_rate: f64,
    /// Regularisation of the accepted step.
    pub epsilon: f64,
    pub psi: Vec<f64>,
    /// Stationary profile, `∫ u = 1`.
    pub u: Vec<f64>,
    /// Reproductive value, `∫ u φ = 1`.
    pub phi: Vec<f64>,
    pub phi_at_zero: f64,
    pub phi_at_max: f64,
    pub mu_trace: Vec<(f64, f64)>,
    pub epsilon_trace: Vec<(f64, f64)>,
    pub converged: bool,
    pub phi_converged: bool,
    /// `∫ g u / ∫ x u`, which equals `Λ₀` for an exact eigenpair.
    pub rayleigh_quotient: f64,
    /// Sup-norm of the stationary equation residual over interior nodes,
    /// relative to `sup |u|`.
    pub stationary_residual: f64,
}

impl EigenSolution {
    /// Interpolant of `φ` on [0, M], endpoints included.
    pub fn phi_interpolant(&self) -> Result<MonotoneCubic> {
        let mut xs = vec![0.0];
        xs.extend_from_slice(self.grid.nodes());
        xs.push(self.grid.max_mass());
        let mut ys = vec![self.phi_at_zero];
        ys.extend_from_slice(&self.phi);
        ys.push(self.phi_at_max);
        MonotoneCubic::new(xs, ys)
    }
}

/// Stateful solver reusing one characteristic mesh across `(λ, ε)`.
pub struct EigenSolver {
    spec: ModelSpec,
    grid: MassGrid,
    assembler: OperatorAssembler,
    opts: EigenOptions,
    c_bq: f64,
}

impl EigenSolver {
    pub fn new(spec: &ModelSpec, grid: &MassGrid, opts: EigenOptions) -> Result<Self> {
        if spec.max_division_rate() <= 0.0 {
            return Err(GrowFragError::InvalidModel(
                "division rate vanishes identically; the eigenproblem has no solution".into(),
            ));
        }
        if opts.epsilon_schedule.is_empty()
            || opts.epsilon_schedule.iter().any(|&e| !(e > 0.0))
            || opts.epsilon_schedule.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(GrowFragError::InvalidArgument("ε schedule must be positive and strictly decreasing".into()));
        }
        let eps_min = *opts.epsilon_schedule.last().unwrap();
        let assembler = OperatorAssembler::new(spec, grid, eps_min)?;
        let mut c_bq = 0.0f64;
        let mut ys = grid.nodes().to_vec();
        ys.push(spec.max_mass);
        for &y in &ys {
            c_bq = c_bq.max(spec.fragmentation_kernel(0.5 * y, y));
            for &x in grid.nodes() {
                c_bq = c_bq.max(spec.fragmentation_kernel(x, y));
            }
        }
        Ok(Self { spec: spec.clone(), grid: grid.clone(), assembler, opts, c_bq })
    }

    pub fn options(&self) -> &EigenOptions {
        &self.opts
    }

    pub fn c_bq(&self) -> f64 {
        self.c_bq
    }

    pub fn assemble(&self, lambda: f64, epsilon: f64) -> Result<OperatorMatrix> {
        self.assembler.assemble(lambda, epsilon)
    }

    pub fn mu(&self, lambda: f64, epsilon: f64, warm: Option<&[f64]>) -> Result<DominantPair> {
        let k = self.assemble(lambda, epsilon)?;
        dominant_eigen_with_limit(&k, self.opts.power_tol, warm, self.opts.power_max_iter)
    }

    /// Upper bracket `2 (C_bq M + ε)` beyond which `μ < 1`.
    pub fn lambda_max(&self, epsilon: f64) -> f64 {
        2.0 * (self.c_bq * self.spec.max_mass + epsilon)
    }

    /// Bisection for `μ^ε(λ) = 1`.
    pub fn solve_lambda(&self, epsilon: f64, warm: Option<&[f64]>) -> Result<LambdaRoot> {
        if !(epsilon > 0.0) {
            return Err(GrowFragError::InvalidArgument(format!("ε must be positive, got {epsilon}")));
        }
        let mut trace = Vec::new();
        let mut lo = LAMBDA_MIN;
        let low = self.mu(lo, epsilon, warm)?;
        trace.push((lo, low.mu));
        if low.mu < 1.0 {
            return Err(GrowFragError::NoSupercriticalRoot { lambda: lo, mu: low.mu });
        }
        let mut hi = self.lambda_max(epsilon);
        let mut high = self.mu(hi, epsilon, Some(&low.vector))?;
        trace.push((hi, high.mu));
        let mut expansions = 0;
        while high.mu >= 1.0 {
            expansions += 1;
            if expansions > 60 {
                return Err(GrowFragError::numerical("λ bracket", "μ stays above 1 at every upper bracket"));
            }
            lo = hi;
            hi *= 2.0;
            high = self.mu(hi, epsilon, Some(&high.vector))?;
            trace.push((hi, high.mu));
        }
        let root = self.bisect(lo, hi, epsilon, low, &mut trace)?;
        let monotone = is_monotone_decreasing(&trace);
        if monotone {
            return Ok(LambdaRoot { lambda: root.0, mu: root.1.mu, psi: root.1.vector, mu_trace: trace, monotone });
        }
        // fall back to a scan for the first downward crossing, then bisect locally
        let scan_hi = hi;
        let points = 64;
        let mut prev = (LAMBDA_MIN, self.mu(LAMBDA_MIN, epsilon, None)?);
        for k in 1..=points {
            let lam = LAMBDA_MIN * (scan_hi / LAMBDA_MIN).powf(k as f64 / points as f64);
            let cur = self.mu(lam, epsilon, Some(&prev.1.vector))?;
            trace.push((lam, cur.mu));
            if cur.mu < 1.0 {
                let root = self.bisect(prev.0, lam, epsilon, prev.1, &mut trace)?;
                return Ok(LambdaRoot {
                    lambda: root.0,
                    mu: root.1.mu,
                    psi: root.1.vector,
                    mu_trace: trace,
                    monotone: false,
                });
            }
            prev = (lam, cur);
        }
        Err(GrowFragError::numerical("λ scan", "no crossing of μ = 1 found"))
    }

    fn bisect(
        &self,
        mut lo: f64,
        mut hi: f64,
        epsilon: f64,
        start: DominantPair,
        trace: &mut Vec<(f64, f64)>,
    ) -> Result<(f64, DominantPair)> {
        let mut best = (lo, start);
        let mut warm = best.1.vector.clone();
        for _ in 0..self.opts.bisection_max_iter {
            let mid = 0.5 * (lo + hi);
            let pair = self.mu(mid, epsilon, Some(&warm))?;
            trace.push((mid, pair.mu));
            warm.clone_from(&pair.vector);
            let better = (pair.mu - 1.0).abs() < (best.1.mu - 1.0).abs();
            if pair.mu > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if better {
                best = (mid, pair);
            }
            if (best.1.mu - 1.0).abs() <= self.opts.mu_tol || hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(best)
    }

    /// Runs the ε schedule until two consecutive `Λ_ε` agree to `lambda_tol`.
    pub fn continuation(&self) -> Result<Continuation> {
        let mut epsilon_trace = Vec::new();
        let mut mu_trace = Vec::new();
        let mut warm: Option<Vec<f64>> = None;
        let mut steps: Vec<(f64, LambdaRoot)> = Vec::new();
        let mut converged = false;
        for &eps in &self.opts.epsilon_schedule {
            let root = self.solve_lambda(eps, warm.as_deref())?;
            epsilon_trace.push((eps, root.lambda));
            mu_trace.extend(root.mu_trace.iter().cloned());
            warm = Some(root.psi.clone());
            let gap = steps.last().map(|(_, prev)| (prev.lambda - root.lambda).abs());
            steps.push((eps, root));
            if matches!(gap, Some(g) if g < self.opts.lambda_tol) {
                converged = true;
                break;
            }
        }
        let (epsilon, last) = steps.pop().unwrap();
        let previous = steps.pop();
        Ok(Continuation {
            lambda0: last.lambda,
            epsilon,
            psi: last.psi,
            previous: previous.map(|(e, r)| (e, r.lambda)),
            epsilon_trace,
            mu_trace,
            converged,
        })
    }

    /// Stationary profile from `Ψ` by integrating `(g u)' = -(Λ₀ + b) u + Ψ`
    /// along the characteristic, normalised to `∫ u = 1`.
    pub fn build_u(&self, lambda0: f64, psi: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if psi.len() != n {
            return Err(GrowFragError::InvalidArgument("Ψ length does not match the grid".into()));
        }
        let ch = self.assembler.characteristic();
        let xs = self.grid.nodes();
        let mut v = vec![0.0; n];
        // Ψ vanishes linearly at 0 and no exponent accumulates below the first node
        v[0] = 0.5 * xs[0] * psi[0];
        for j in 1..n {
            let (a, b) = (ch.node_position(j - 1), ch.node_position(j));
            let drop = ch.survival_between(lambda0, a, b);
            let dx = xs[j] - xs[j - 1];
            let kappa = -drop.ln() / dx;
            // ∫ Ψ(y) e^{-κ (x_j - y)} dy with Ψ linear on [x_{j-1}, x_j]
            let [w_near, w_far] = fitted_trapezoid_weights(dx, kappa);
            v[j] = drop * v[j - 1] + w_near * psi[j] + w_far * psi[j - 1];
        }
        let mut u: Vec<f64> = v
            .iter()
            .zip(xs)
            .map(|(&vj, &x)| {
                let g = self.spec.growth_rate(x);
                if g > 0.0 {
                    vj / g
                } else {
                    0.0
                }
            })
            .collect();
        let mass = self.grid.integrate(&u);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(GrowFragError::numerical("stationary profile", format!("∫u = {mass}")));
        }
        for x in u.iter_mut() {
            *x /= mass;
        }
        Ok(u)
    }

    /// Perron vector of the adjoint operator at `(λ, ε)`, normalised so that
    /// `∫ u φ = 1`, together with its values at 0 and M.
    pub fn build_phi(&self, lambda: f64, epsilon: f64, u: &[f64]) -> Result<(Vec<f64>, f64, f64, f64)> {
        let k = self.assemble(lambda, epsilon)?;
        let kstar = k.adjoint(self.grid.weights());
        let pair = dominant_eigen_with_limit(&kstar, self.opts.power_tol, None, self.opts.power_max_iter)?;
        let scale = self.grid.inner(u, &pair.vector);
        if !(scale > 0.0) {
            return Err(GrowFragError::numerical("adjoint normalisation", format!("∫uφ = {scale}")));
        }
        let phi: Vec<f64> = pair.vector.iter().map(|v| v / scale).collect();
        let (at_zero, at_max) = self.adjoint_endpoints(lambda, epsilon, &phi, pair.mu);
        Ok((phi, at_zero, at_max, pair.mu))
    }

    /// Adjoint operator evaluated at the fixed points 0 and M of the flow.
    fn adjoint_endpoints(&self, lambda: f64, epsilon: f64, phi: &[f64], mu: f64) -> (f64, f64) {
        let m = self.spec.max_mass;
        let total = self.grid.integrate(phi);
        // the flow stays at 0 where b vanishes
        let at_zero = 2.0 * epsilon / m * total / (lambda + epsilon) / mu;
        let bm = self.spec.division_rate(m);
        let gain: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(phi)
            .map(|((&y, &w), &f)| w * (self.spec.fragmentation_kernel(y, m) + epsilon / m) * f)
            .sum();
        let at_max = 2.0 * gain / (lambda + bm + epsilon) / mu;
        (at_zero, at_max)
    }

    /// Sup-norm of `∂x(g u) + (Λ₀ + b) u - 2 ∫ b(z)/z q(x/z) u(z) dz` over
    /// interior nodes, relative to `sup |u|`.
    pub fn stationary_residual(&self, lambda0: f64, u: &[f64]) -> f64 {
        let xs = self.grid.nodes();
        let ws = self.grid.weights();
        let n = xs.len();
        let gu: Vec<f64> = xs.iter().zip(u).map(|(&x, &v)| self.spec.growth_rate(x) * v).collect();
        let top = u.iter().cloned().fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let (hl, hr) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            let deriv = (hl * hl * (gu[i + 1] - gu[i]) + hr * hr * (gu[i] - gu[i - 1])) / (hl * hr * (hl + hr));
            let gain: f64 = (0..n).map(|j| ws[j] * self.spec.fragmentation_kernel(xs[i], xs[j]) * u[j]).sum();
            let r = deriv + (lambda0 + self.spec.division_rate(xs[i])) * u[i] - 2.0 * gain;
            worst = worst.max(r.abs());
        }
        worst / top
    }

    pub fn rayleigh_quotient(&self, u: &[f64]) -> f64 {
        let xs = self.grid.nodes();
        let num: f64 = xs
            .iter()
            .zip(self.grid.weights())
            .zip(u)
            .map(|((&x, &w), &v)| w * self.spec.growth_rate(x) * v)
            .sum::<f64>();
        let den = self.grid.inner(xs, u);
        num / den
    }

    /// Full pipeline: continuation, profile, adjoint.
    pub fn solve(&self) -> Result<EigenSolution> {
        let cont = self.continuation()?;
        let u = self.build_u(cont.lambda0, &cont.psi)?;
        let (phi, phi_at_zero, phi_at_max, _) = self.build_phi(cont.lambda0, cont.epsilon, &u)?;
        let phi_converged = match cont.previous {
            Some((eps_prev, lam_prev)) => {
                let (phi_prev, _, _, _) = self.build_phi(lam_prev, eps_prev, &u)?;
                let top = phi.iter().cloned().fold(0.0, f64::max);
                let diff = phi.iter().zip(&phi_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                diff <= self.opts.phi_tol * top
            }
            None => false,
        };
        let rayleigh_quotient = self.rayleigh_quotient(&u);
        let stationary_residual = self.stationary_residual(cont.lambda0, &u);
        Ok(EigenSolution {
            grid: self.grid.clone(),
            lambda: cont.lambda0 - self.spec.death_rate,
            lambda0: cont.lambda0,
            death_rate: self.spec.death_rate,
            epsilon: cont.epsilon,
            psi: cont.psi,
            u,
            phi,
            phi_at_zero,
            phi_at_max,
            mu_trace: cont.mu_trace,
            epsilon_trace: cont.epsilon_trace,
            converged: cont.converged,
            phi_converged,
            rayleigh_quotient,
            stationary_residual,
        })
    }
}

/// Result of the ε continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub lambda0: f64,
    pub epsilon: f64,
    pub psi: Vec<f64>,
    /// `(ε, Λ_ε)` of the step before the accepted one.
    pub previous: Option<(f64, f64)>,
    pub epsilon_trace: Vec<(f64, f64)>,
    pub mu_trace: Vec<(f64, f64)>,
    pub converged: bool,
}

fn is_monotone_decreasing(trace: &[(f64, f64)]) -> bool {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 || w[1].0 == w[0].0)
}

/// Solves the eigenproblem for `spec` on `grid`.
pub fn solve(spec: &ModelSpec, grid: &MassGrid, opts: EigenOptions) -> Result<EigenSolution> {
    EigenSolver::new(spec, grid, opts)?.solve()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub death_rate: f64,
    pub lambda: f64,
    pub expected: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub lambda_without_death: f64,
    pub entries: Vec<ShiftEntry>,
    /// Dominant μ at `(Λ₀, ε)` from two different positive start vectors.
    pub restart_mu: (f64, f64),
    pub max_error: f64,
}

/// Checks `Λ(D) = Λ(0) - D` for each death rate and that power iteration
/// from different positive starts returns the same Perron eigenvalue.
pub fn eigenvalue_shift_check(
    spec: &ModelSpec,
    grid: &MassGrid,
    death_rates: &[f64],
    opts: EigenOptions,
) -> Result<ShiftReport> {
    let base_spec = spec.with_death_rate(0.0)?;
    let base_solver = EigenSolver::new(&base_spec, grid, opts.clone())?;
    let base = base_solver.continuation()?;
    let mut entries = Vec::new();
    for &d in death_rates {
        if !(d >= 0.0) {
            return Err(GrowFragError::InvalidArgument(format!("death rate must be non-negative, got {d}")));
        }
        let shifted = EigenSolver::new(&spec.with_death_rate(d)?, grid, opts.clone())?;
        let cont = shifted.continuation()?;
        let lambda = cont.lambda0 - d;
        let expected = base.lambda0 - d;
        entries.push(ShiftEntry { death_rate: d, lambda, expected, error: (lambda - expected).abs() });
    }
    let k = base_solver.assemble(base.lambda0, base.epsilon)?;
    let n = grid.len();
    let start_a: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let start_b: Vec<f64> = (0..n).map(|i| 0.1 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let tol = opts.power_tol;
    let mu_a = dominant_eigen_with_limit(&k, tol, Some(&start_a), opts.power_max_iter)?.mu;
    let mu_b = dominant_eigen_with_limit(&k, tol, Some(&start_b), opts.power_max_iter)?.mu;
    let max_error = entries.iter().map(|e| e.error).fold(0.0, f64::max);
    Ok(ShiftReport { lambda_without_death: base.lambda0, entries, restart_mu: (mu_a, mu_b), max_error })
}

/// `⟨K f, g⟩_w` for the weighted inner product.
pub fn weighted_pairing(k: &OperatorMatrix, weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let kf = k.apply(f);
    kf.iter().zip(g).zip(weights).map(|((a, b), w)| a * b * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (ModelSpec, MassGrid, EigenSolver) {
        let spec = ModelSpec::reference(0.0);
        let grid = MassGrid::uniform(1.0, n).unwrap();
        let solver = EigenSolver::new(&spec, &grid, EigenOptions::default()).unwrap();
        (spec, grid, solver)
    }

    #[test]
    fn mu_limits() {
        let (_, _, s) = setup(80);
        let low = s.mu(1e-4, 1e-3, None).unwrap();
        assert!((low.mu - 2.0).abs() < 1e-2, "μ = {}", low.mu);
        let high = s.mu(1e3, 1e-3, None).unwrap();
        assert!(high.mu < 0.1);
        let far = s.mu(1e3 * (s.c_bq() + 1e-3), 1e-3, None).unwrap();
        assert!(far.mu < 1e-2);
    }

    #[test]
    fn operator_is_positive_and_row_bounded() {
        let (_, _, s) = setup(60);
        for &(lam, eps) in &[(0.1, 1e-2), (1.0, 1e-3), (5.0, 1e-1)] {
            let k = s.assemble(lam, eps).unwrap();
            assert!(k.min_entry() > 0.0);
            let bound = 2.0 * (s.c_bq() + eps) / (lam + eps);
            for r in k.row_sums() {
                assert!(r <= bound * (1.0 + 1e-6), "row sum {r} > {bound}");
            }
        }
    }

    #[test]
    fn zero_division_gives_zero_operator() {
        use crate::model::{DivisionRate, FragmentKernel, GrowthLaw};
        let zero = MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let spec = ModelSpec::new(
            GrowthLaw::Gompertz { a: 1.0 },
            DivisionRate::Tabulated(zero),
            FragmentKernel::SymmetricBeta { beta: 2.0 },
            0.0,
            1.0,
        )
        .unwrap();
        let grid = MassGrid::uniform(1.0, 30).unwrap();
        let k = assemble_operator(&spec, &grid, 0.5, 0.0).unwrap();
        assert!(k.entries.iter().all(|&v| v == 0.0));
        assert!(EigenSolver::new(&spec, &grid, EigenOptions::default()).is_err());
    }

    #[test]
    fn eigenvector_reproduces_itself() {
        let (_, _, s) = setup(60);
        let k = s.assemble(0.5, 1e-2).unwrap();
        let pair = dominant_eigen(&k, 1e-13, None).unwrap();
        let kv = k.apply(&pair.vector);
        for (a, b) in kv.iter().zip(&pair.vector) {
            assert!((a - pair.mu * b).abs() < 1e-10);
        }
        assert!((pair.vector.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn root_has_unit_mu_and_monotone_trace() {
        let (_, _, s) = setup(60);
        let root = s.solve_lambda(1e-2, None).unwrap();
        assert!(root.lambda > 0.0);
        assert!((root.mu - 1.0).abs() <= 1e-8);
        assert!(root.monotone);
    }

    #[test]
    fn solution_satisfies_profile_checks() {
        let (spec, grid, s) = setup(100);
        let sol = s.solve().unwrap();
        assert!(sol.converged);
        assert!(sol.lambda + spec.death_rate > 0.0);
        assert!((grid.integrate(&sol.u) - 1.0).abs() < 1e-10);
        assert!(sol.u.iter().all(|&v| v >= 0.0));
        assert!((sol.lambda0 - sol.rayleigh_quotient).abs() <= 1e-3);
        assert!(sol.stationary_residual <= 1e-2);
        assert!((grid.inner(&sol.u, &sol.phi) - 1.0).abs() < 1e-8);
        assert!(sol.phi.iter().all(|&v| v > 0.0));
        assert!(sol.phi_at_zero < 1e-4);
        let gaps: Vec<f64> = sol.epsilon_trace.windows(2).map(|w| (w[0].1 - w[1].1).abs()).collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]));
    }

    #[test]
    fn adjoint_is_consistent() {
        let (_, grid, s) = setup(50);
        let k = s.assemble(0.7, 1e-3).unwrap();
        let ks = k.adjoint(grid.weights());
        let f: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + 1.2).collect();
        let g: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos() + 0.3).collect();
        let lhs = weighted_pairing(&k, grid.weights(), &f, &g);
        let rhs = weighted_pairing(&ks, grid.weights(), &g, &f);
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs());
    }

    #[test]
    fn shift_law_and_restart_uniqueness() {
        let spec = ModelSpec::reference(0.0);
        let grid = MassGrid::uniform(1.0, 60).unwrap();
        let report = eigenvalue_shift_check(&spec, &grid, &[0.0, 0.25], EigenOptions::default()).unwrap();
        assert!(report.max_error <= 1e-8);
        assert!((report.restart_mu.0 - report.restart_mu.1).abs() <= 1e-10);
    }

    #[test]
    fn death_rate_shifts_reported_lambda() {
        let grid = MassGrid::uniform(1.0, 60).unwrap();
        let a = solve(&ModelSpec::reference(0.0), &grid, EigenOptions::default()).unwrap();
        let b = solve(&ModelSpec::reference(0.4), &grid, EigenOptions::default()).unwrap();
        assert!((b.lambda - (a.lambda - 0.4)).abs() <= 1e-8);
        assert_eq!(b.lambda0, a.lambda0);
    }
}
