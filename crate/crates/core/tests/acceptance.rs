//! Acceptance suite: ten criteria on the reference model (Gompertz a = 1,
//! M = 1, Beta(2, 2) kernel, ramp b̄ = 3 above m_div = 0.25). Each criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use growfrag::eigen::{self, dominant_eigen, eigenvalue_shift_check, EigenOptions, EigenSolver};
use growfrag::extinction::{dichotomy, solve_extinction, Dichotomy, ExtinctionOptions, PicardMap};
use growfrag::pde::{self, PdeState};
use growfrag::quadrature::GaussLegendre;
use growfrag::simulate::{estimate_survival, simulate, simulate_many, SimulationOptions};
use growfrag::validate::check_martingale;
use growfrag::{DivisionRate, FragmentKernel, GrowthLaw, HittingTime, MassGrid, ModelSpec};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn reference(d: f64) -> ModelSpec {
    ModelSpec::reference(d)
}

fn grid(n: usize) -> MassGrid {
    MassGrid::uniform(1.0, n).unwrap()
}

/// Λ₀ of the reference model without death at n = 200.
fn lambda0() -> f64 {
    EigenSolver::new(&reference(0.0), &grid(200), EigenOptions::default()).unwrap().continuation().unwrap().lambda0
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let s = EigenSolver::new(&reference(0.0), &grid(200), EigenOptions::default()).unwrap();
    let k = s.assemble(1e-4, 1e-3).unwrap();
    let pair = dominant_eigen(&k, 1e-12, None).unwrap();
    let elapsed = start.elapsed();
    outcome(
        (pair.mu - 2.0).abs() <= 1e-2 && elapsed < Duration::from_secs(30),
        format!("μ(λ = 1e-4, ε = 1e-3) = {:.6}, |μ - 2| = {:.2e}, {elapsed:.2?}", pair.mu, (pair.mu - 2.0).abs()),
    )
}

fn criterion_2() -> Outcome {
    let s = EigenSolver::new(&reference(0.0), &grid(200), EigenOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut all_positive = true;
    let mut parts = Vec::new();
    for eps in [1e-2, 1e-4, 1e-6] {
        let root = s.solve_lambda(eps, None).unwrap();
        // re-evaluate μ at the returned root from a cold start
        let mu = s.mu(root.lambda, eps, None).unwrap().mu;
        worst = worst.max((mu - 1.0).abs());
        all_positive &= root.lambda > 0.0;
        parts.push(format!("Λ_{eps:e} = {:.8}", root.lambda));
    }
    outcome(worst <= 1e-8 && all_positive, format!("{}; max |μ(Λ_ε) - 1| = {worst:.2e}", parts.join(", ")))
}

fn criterion_3() -> Outcome {
    let r = eigenvalue_shift_check(&reference(0.0), &grid(200), &[0.1, 0.25, 0.5], EigenOptions::default()).unwrap();
    outcome(
        r.max_error <= 1e-8,
        format!("Λ(0) = {:.8}, max |Λ(D) - (Λ(0) - D)| = {:.2e}", r.lambda_without_death, r.max_error),
    )
}

fn criterion_4() -> Outcome {
    let sol = eigen::solve(&reference(0.0), &grid(400), EigenOptions::default()).unwrap();
    let gap = (sol.lambda0 - sol.rayleigh_quotient).abs();
    outcome(gap <= 1e-3, format!("Λ₀ = {:.8}, ∫gu/∫xu = {:.8}, gap = {gap:.2e}", sol.lambda0, sol.rayleigh_quotient))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let g = grid(400);
    let sol = eigen::solve(&reference(0.0), &g, EigenOptions::default()).unwrap();
    let r0 = PdeState::default_initial(&g).unwrap();
    let run = pde::growth_rate(&reference(0.0), &r0, 40.0).unwrap();
    let elapsed = start.elapsed();
    let gap = (sol.lambda - run.lambda_hat).abs();
    outcome(
        gap <= 5e-2 && elapsed < Duration::from_secs(120),
        format!("Λ_eigen = {:.6}, Λ_pde = {:.6}, gap = {gap:.2e}, {elapsed:.2?}", sol.lambda, run.lambda_hat),
    )
}

fn criterion_6() -> Outcome {
    let l0 = lambda0();
    let g = grid(200);
    let sim = SimulationOptions { horizon: 30.0, max_pop: 500, ..Default::default() };
    let (x0, replicas, seed) = (0.5, 2000, 0);

    let start = Instant::now();
    let sup = reference(l0 - 0.3);
    let p = solve_extinction(&sup, &g, ExtinctionOptions::default()).unwrap();
    let est = estimate_survival(&sup, x0, &sim, replicas, seed).unwrap();
    let t_sup = start.elapsed();
    let q = 1.0 - p.extinction_at(x0);
    let sigma = (q * (1.0 - q) / replicas as f64).sqrt();
    let gap = (q - est.p_hat).abs();
    let sup_ok = est.ci_excludes_zero() && gap <= 3.0 * sigma && t_sup < Duration::from_secs(120);

    let start = Instant::now();
    let sub = reference(l0 + 0.3);
    let p = solve_extinction(&sub, &g, ExtinctionOptions::default()).unwrap();
    let est_sub = estimate_survival(&sub, x0, &sim, replicas, seed).unwrap();
    let t_sub = start.elapsed();
    let worst = p.values.iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max);
    let sub_ok = est_sub.survived == 0 && worst <= 1e-2 && t_sub < Duration::from_secs(120);

    outcome(
        sup_ok && sub_ok,
        format!(
            "Λ = +0.3: p̂ = {:.4} ± {:.4}, 1 - p(0.5) = {q:.4}, gap {:.2}σ, {t_sup:.2?}; \
             Λ = -0.3: {} of {replicas} survived, max |1 - p| = {worst:.1e}, {t_sub:.2?}",
            est.p_hat,
            est.ci_halfwidth,
            gap / sigma,
            est_sub.survived
        ),
    )
}

/// Five models spanning growth laws, kernels, thresholds and both regimes.
fn battery() -> Vec<(&'static str, ModelSpec)> {
    let ramp = |bbar, mdiv| DivisionRate::RampAboveThreshold { bbar, mdiv };
    let beta = |b| FragmentKernel::SymmetricBeta { beta: b };
    vec![
        ("reference D=0.2", reference(0.2)),
        ("reference D=1.5", reference(1.5)),
        (
            "power-logistic D=0.3",
            ModelSpec::new(GrowthLaw::PowerLogistic { a: 1.0, theta: 1.0 }, ramp(3.0, 0.25), beta(2.0), 0.3, 1.0)
                .unwrap(),
        ),
        (
            "beta(5,5) mdiv=0.4 D=0.1",
            ModelSpec::new(GrowthLaw::Gompertz { a: 1.0 }, ramp(2.0, 0.4), beta(5.0), 0.1, 1.0).unwrap(),
        ),
        (
            "M=2 a=0.5 D=1.0",
            ModelSpec::new(GrowthLaw::Gompertz { a: 0.5 }, ramp(1.5, 0.6), beta(3.0), 1.0, 2.0).unwrap(),
        ),
    ]
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, spec) in battery() {
        let g = MassGrid::uniform(spec.max_mass, 200).unwrap();
        let p = solve_extinction(&spec, &g, ExtinctionOptions::default()).unwrap();
        let verdict = dichotomy(&p, 1e-3);
        ok &= p.converged && verdict != Dichotomy::Inconclusive;
        parts.push(format!("{name}: {verdict:?}"));
    }
    outcome(ok, parts.join(", "))
}

fn criterion_8() -> Outcome {
    let spec = reference(0.0);
    let sol = eigen::solve(&spec, &grid(200), EigenOptions::default()).unwrap();
    let phi = sol.phi_interpolant().unwrap();
    let times = [1.0, 2.0, 4.0];
    let good = check_martingale(&spec, sol.lambda, &phi, 0.5, &times, 4000, 0).unwrap();
    let bad = check_martingale(&spec, sol.lambda + 0.2, &phi, 0.5, &times, 4000, 0).unwrap();
    let zs: Vec<String> = good.entries.iter().map(|e| format!("{:.2}", e.z)).collect();
    let worst_bad = bad.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    outcome(
        good.passed && !bad.passed,
        format!("z at t = 1, 2, 4: [{}]; control Λ + 0.2 max |z| = {worst_bad:.1}", zs.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut worst_drop: f64 = 0.0;
    let mut worst_fixed: f64 = 0.0;
    for (_, spec) in battery() {
        let g = MassGrid::uniform(spec.max_mass, 200).unwrap();
        let opts = ExtinctionOptions { keep_generations: true, ..Default::default() };
        let p = solve_extinction(&spec, &g, opts).unwrap();
        for w in p.generation_curves.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                worst_drop = worst_drop.max(a - b);
            }
        }
        let ones = vec![1.0; g.len()];
        let image = PicardMap::new(&spec, &g).unwrap().apply(&ones).unwrap();
        worst_fixed = worst_fixed.max(image.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
        ok &= p.converged;
    }
    ok &= worst_drop <= 0.0 && worst_fixed <= 1e-6;
    outcome(ok, format!("max p_n - p_(n+1) = {worst_drop:.2e}, max |G(1) - 1| = {worst_fixed:.2e}"))
}

fn criterion_10() -> Outcome {
    let spec = reference(0.0);
    let mut flow_err: f64 = 0.0;
    let mut hit_err: f64 = 0.0;
    for i in 1..40 {
        let x = i as f64 / 40.0;
        for &t in &[0.0f64, 0.1, 0.7, 2.0, 5.0] {
            let exact = (x.ln() * (-t).exp()).exp();
            flow_err = flow_err.max((spec.flow(x, t).unwrap() - exact).abs());
        }
        for j in i..40 {
            let y = j as f64 / 40.0;
            let exact = ((1.0 / x).ln() / (1.0 / y).ln()).ln();
            if let HittingTime::Finite(t) = spec.hitting_time(x, y).unwrap() {
                hit_err = hit_err.max((t - exact).abs());
            } else {
                hit_err = f64::INFINITY;
            }
        }
    }
    let e = (-1.0f64).exp();
    flow_err = flow_err.max((spec.flow(e, 2f64.ln()).unwrap() - (-0.5f64).exp()).abs());
    hit_err = hit_err.max((spec.hitting_time(e, (-0.5f64).exp()).unwrap().finite().unwrap() - 2f64.ln()).abs());
    let never = spec.hitting_time(0.5, 1.0).unwrap() == HittingTime::Never;

    let gl = GaussLegendre::new(40);
    let q = |a: f64| spec.kernel_density(a).unwrap();
    let norm = (gl.integrate(0.0, 1.0, q) - 1.0).abs();
    let mean = (gl.integrate(0.0, 1.0, |a| a * q(a)) - 0.5).abs();
    let sym = (0..=100).map(|k| k as f64 / 100.0).map(|a| (q(a) - q(1.0 - a)).abs()).fold(0.0, f64::max);

    let opts = SimulationOptions { horizon: 6.0, max_pop: 200, record_events: true, ..Default::default() };
    let sim_spec = reference(0.1);
    let a = simulate(&sim_spec, 0.5, &opts, &[], 2024).unwrap();
    let b = simulate(&sim_spec, 0.5, &opts, &[], 2024).unwrap();
    let logs = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let runs = pool.install(|| simulate_many(&sim_spec, 0.5, &opts, &[], 16, 2024).unwrap());
        serde_json::to_vec(&runs).unwrap()
    };
    let identical =
        a.log.len() > 10 && serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap() && logs(1) == logs(4);

    outcome(
        flow_err <= 1e-10 && hit_err <= 1e-10 && never && norm <= 1e-10 && mean <= 1e-10 && sym <= 1e-10 && identical,
        format!(
            "flow {flow_err:.1e}, hitting {hit_err:.1e}, ∫q - 1 {norm:.1e}, ∫αq - 1/2 {mean:.1e}, \
             symmetry {sym:.1e}, identical logs: {identical} ({} events)",
            a.log.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("μ-limit", criterion_1),
        ("fixed point", criterion_2),
        ("shift law", criterion_3),
        ("Rayleigh identity", criterion_4),
        ("oracle agreement", criterion_5),
        ("criterion equivalence", criterion_6),
        ("dichotomy", criterion_7),
        ("martingale", criterion_8),
        ("monotone Picard", criterion_9),
        ("exactness", criterion_10),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  {}",
            k + 1,
            name,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
