//! Cross-route checks: the sign of `Λ` against survival, the martingale
//! identity for `e^{-Λt} ⟨η_t, φ⟩`, and the growth bound on `E[N_t]`.

use crate::eigen::{self, EigenOptions, EigenSolution};
use crate::error::{GrowFragError, Result};
use crate::extinction::{dichotomy, solve_extinction, Dichotomy, ExtinctionOptions, ExtinctionProfile};
use crate::grid::MassGrid;
use crate::interp::MonotoneCubic;
use crate::model::ModelSpec;
use crate::pde::{self, PdeState};
use crate::simulate::{estimate_survival, weighted_expectation, SimulationOptions, SurvivalEstimate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Near-critical or otherwise outside the scope of a pass/fail verdict.
    Informational,
    /// A sub-solver failed; never counted as a pass.
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, status: Status, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status, detail: detail.into() }
    }

    fn from_bool(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self::new(name, if ok { Status::Pass } else { Status::Fail }, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckOptions {
    pub grid_n: usize,
    pub x0: f64,
    pub pde_horizon: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub max_pop: usize,
    pub seed: u64,
    /// `|Λ|` below which the sign verdict is informational.
    pub dead_zone: f64,
    /// Allowed `|Λ_eigen - Λ_pde|`.
    pub pde_tol: f64,
    /// Allowed distance of `p` from 1 in the extinct regime.
    pub extinction_tol: f64,
    /// Margin used to classify the Picard profile.
    pub margin: f64,
    pub eigen: EigenOptions,
    pub extinction: ExtinctionOptions,
}

impl Default for CrossCheckOptions {
    fn default() -> Self {
        Self {
            grid_n: 200,
            x0: 0.5,
            pde_horizon: 40.0,
            replicas: 2000,
            horizon: 30.0,
            max_pop: 500,
            seed: 0,
            dead_zone: 0.1,
            pde_tol: 5e-2,
            extinction_tol: 1e-2,
            margin: 1e-3,
            eigen: EigenOptions::default(),
            extinction: ExtinctionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub at_x0: f64,
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub dichotomy: Dichotomy,
}

impl ProfileSummary {
    fn new(p: &ExtinctionProfile, x0: f64, margin: f64) -> Self {
        Self {
            at_x0: p.extinction_at(x0),
            min: p.values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: p.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            iterations: p.iterations,
            converged: p.converged,
            dichotomy: dichotomy(p, margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub lambda_eigen: Option<f64>,
    pub lambda_pde: Option<f64>,
    pub p_profile: Option<ProfileSummary>,
    pub mc_survival: Option<SurvivalEstimate>,
    pub martingale: Option<MartingaleReport>,
    pub growth_bound: Option<GrowthBoundReport>,
    pub verdicts: Vec<Verdict>,
}

impl CrossCheckReport {
    /// No check failed and none was skipped by a solver failure.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| matches!(v.status, Status::Pass | Status::Informational))
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Runs the eigen, transient, Picard and Monte Carlo routes and checks that
/// they agree on the fate of a population founded by one individual of mass
/// `x0`.
pub fn check_criterion(spec: &ModelSpec, opts: &CrossCheckOptions) -> Result<CrossCheckReport> {
    Ok(criterion_with_solution(spec, opts)?.0)
}

fn criterion_with_solution(
    spec: &ModelSpec,
    opts: &CrossCheckOptions,
) -> Result<(CrossCheckReport, Option<EigenSolution>)> {
    let grid = MassGrid::uniform(spec.max_mass, opts.grid_n)?;
    let mut verdicts = Vec::new();
    let no_division = spec.max_division_rate() <= 0.0;

    let eigen = if no_division {
        verdicts.push(Verdict::new("eigen", Status::Informational, "no division: the eigenproblem is undefined"));
        None
    } else {
        match eigen::solve(spec, &grid, opts.eigen.clone()) {
            Ok(sol) => {
                verdicts.push(Verdict::from_bool(
                    "eigen",
                    sol.converged && sol.lambda + spec.death_rate > 0.0,
                    format!("Λ = {:.6}, continuation converged: {}", sol.lambda, sol.converged),
                ));
                Some(sol)
            }
            Err(e) => {
                verdicts.push(Verdict::new("eigen", Status::NotRun, e.to_string()));
                None
            }
        }
    };
    let lambda = eigen.as_ref().map(|s| s.lambda);

    let lambda_pde = match PdeState::default_initial(&grid).and_then(|r0| pde::growth_rate(spec, &r0, opts.pde_horizon))
    {
        Ok(run) => Some(run.lambda_hat),
        Err(e) => {
            verdicts.push(Verdict::new("pde-agreement", Status::NotRun, e.to_string()));
            None
        }
    };
    if let (Some(le), Some(lp)) = (lambda, lambda_pde) {
        let gap = (le - lp).abs();
        verdicts.push(Verdict::from_bool(
            "pde-agreement",
            gap <= opts.pde_tol,
            format!("|Λ_eigen - Λ_pde| = {gap:.3e} (tolerance {:.1e})", opts.pde_tol),
        ));
    } else if let (true, Some(lp)) = (no_division, lambda_pde) {
        verdicts.push(Verdict::from_bool(
            "pde-agreement",
            (lp + spec.death_rate).abs() <= opts.pde_tol,
            format!("no division: Λ_pde = {lp:.6} against -D = {}", -spec.death_rate),
        ));
    }

    let profile = match solve_extinction(spec, &grid, opts.extinction) {
        Ok(p) => {
            verdicts.push(Verdict::from_bool(
                "picard-converged",
                p.converged,
                format!("{} iterations, residual {:.2e}", p.iterations, p.residual),
            ));
            Some(p)
        }
        Err(e) => {
            verdicts.push(Verdict::new("picard-converged", Status::NotRun, e.to_string()));
            None
        }
    };
    let summary = profile.as_ref().map(|p| ProfileSummary::new(p, opts.x0, opts.margin));

    let sim = SimulationOptions { horizon: opts.horizon, max_pop: opts.max_pop, ..SimulationOptions::default() };
    let mc = match estimate_survival(spec, opts.x0, &sim, opts.replicas, opts.seed) {
        Ok(est) => Some(est),
        Err(e) => {
            verdicts.push(Verdict::new("survival-criterion", Status::NotRun, e.to_string()));
            None
        }
    };

    if let (Some(p), Some(mc)) = (&profile, &mc) {
        let summary = summary.as_ref().expect("summary exists with profile");
        let distance_from_one = p.values.iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max);
        let regime = if no_division { Some(-spec.death_rate) } else { lambda };
        match regime {
            Some(l) if l >= opts.dead_zone => {
                let q = 1.0 - summary.at_x0;
                let sigma = (q * (1.0 - q) / mc.replicas as f64).sqrt();
                let gap = (q - mc.p_hat).abs();
                let ok = mc.ci_excludes_zero() && summary.at_x0 < 1.0 - opts.margin && gap <= 3.0 * sigma;
                verdicts.push(Verdict::from_bool(
                    "survival-criterion",
                    ok,
                    format!(
                        "Λ = {l:.4} > 0: p̂_surv = {:.4} ± {:.4}, 1 - p(x0) = {q:.4}, gap = {:.2}σ",
                        mc.p_hat,
                        mc.ci_halfwidth,
                        if gap == 0.0 { 0.0 } else { gap / sigma }
                    ),
                ));
            }
            Some(l) if l <= -opts.dead_zone => {
                let ok = mc.survived == 0 && distance_from_one <= opts.extinction_tol;
                verdicts.push(Verdict::from_bool(
                    "survival-criterion",
                    ok,
                    format!(
                        "Λ = {l:.4} < 0: {} of {} replicas survived, max |1 - p| = {distance_from_one:.2e}",
                        mc.survived, mc.replicas
                    ),
                ));
            }
            Some(l) => verdicts.push(Verdict::new(
                "survival-criterion",
                Status::Informational,
                format!("near-critical Λ = {l:.4}: p̂_surv = {:.4}, 1 - p(x0) = {:.4}", mc.p_hat, 1.0 - summary.at_x0),
            )),
            None => verdicts.push(Verdict::new("survival-criterion", Status::NotRun, "Λ unavailable")),
        }
    }

    let report = CrossCheckReport {
        lambda_eigen: lambda,
        lambda_pde,
        p_profile: summary,
        mc_survival: mc,
        martingale: None,
        growth_bound: None,
        verdicts,
    };
    Ok((report, eigen))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleEntry {
    pub time: f64,
    /// Sample mean of `e^{-Λt} ⟨η_t, φ⟩`.
    pub mean: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub lambda: f64,
    pub phi_x0: f64,
    pub entries: Vec<MartingaleEntry>,
    pub threshold: f64,
    pub passed: bool,
}

/// z-scores of `mean[e^{-Λt} ⟨η_t, φ⟩] - φ(x0)` at each time; passes when
/// every `|z| ≤ 3`.
pub fn check_martingale(
    spec: &ModelSpec,
    lambda: f64,
    phi: &MonotoneCubic,
    x0: f64,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    let f = |x: f64| phi.eval_clamped(x);
    let phi_x0 = f(x0);
    let est = weighted_expectation(spec, x0, &f, times, replicas, seed)?;
    let entries: Vec<MartingaleEntry> = est
        .iter()
        .map(|e| {
            let scale = (-lambda * e.time).exp();
            let mean = e.mean * scale;
            let se = e.std_error * scale;
            MartingaleEntry { time: e.time, mean, std_error: se, z: z_score(mean - phi_x0, se, phi_x0) }
        })
        .collect();
    let threshold = 3.0;
    let passed = entries.iter().all(|e| e.z.abs() <= threshold);
    Ok(MartingaleReport { lambda, phi_x0, entries, threshold, passed })
}

/// A rounding-level standard error means every replica gave the same value
/// (t = 0), so only a rounding-level difference counts as agreement.
fn z_score(diff: f64, se: f64, scale: f64) -> f64 {
    let rounding = 1e-12 * scale.abs().max(1.0);
    if diff.abs() <= rounding {
        0.0
    } else if se > rounding {
        diff / se
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundEntry {
    pub time: f64,
    /// `E[N_t] e^{-Λt}`.
    pub ratio: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundReport {
    pub lambda: f64,
    pub entries: Vec<GrowthBoundEntry>,
    pub lower: f64,
    pub upper: f64,
    /// Least-squares slope of `ln(E[N_t] e^{-Λt})` against `t`.
    pub log_slope: f64,
    pub max_band_ratio: f64,
    pub max_slope: f64,
    pub passed: bool,
}

/// Checks that `E[N_t] e^{-Λt}` stays in a band with `upper/lower ≤ 10` and
/// without a trend (`|log slope| ≤ 0.05`).
pub fn check_growth_bound(
    spec: &ModelSpec,
    lambda: f64,
    x0: f64,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<GrowthBoundReport> {
    if times.len() < 2 {
        return Err(GrowFragError::InvalidArgument("growth bound needs at least two times".into()));
    }
    let one = |_: f64| 1.0;
    let est = weighted_expectation(spec, x0, &one, times, replicas, seed)?;
    let entries: Vec<GrowthBoundEntry> = est
        .iter()
        .map(|e| {
            let scale = (-lambda * e.time).exp();
            GrowthBoundEntry { time: e.time, ratio: e.mean * scale, std_error: e.std_error * scale }
        })
        .collect();
    let lower = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let upper = entries.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max);
    let (max_band_ratio, max_slope) = (10.0, 0.05);
    let log_slope = if lower > 0.0 {
        let pts: Vec<(f64, f64)> = entries.iter().map(|e| (e.time, e.ratio.ln())).collect();
        least_squares_slope(&pts)
    } else {
        f64::NEG_INFINITY
    };
    let passed = lower > 0.0 && upper / lower <= max_band_ratio && log_slope.abs() <= max_slope;
    Ok(GrowthBoundReport { lambda, entries, lower, upper, log_slope, max_band_ratio, max_slope, passed })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryOptions {
    pub martingale_times: Vec<f64>,
    pub martingale_replicas: usize,
    pub growth_times: Vec<f64>,
    pub growth_replicas: usize,
    /// Added to `Λ` before the martingale and growth-bound checks; a nonzero
    /// shift is a negative control that should make them fail.
    pub lambda_shift: f64,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            martingale_times: vec![0.0, 1.0, 2.0, 4.0],
            martingale_replicas: 4000,
            growth_times: (0..=8).map(f64::from).collect(),
            growth_replicas: 4000,
            lambda_shift: 0.0,
        }
    }
}

/// [`check_criterion`] followed by the martingale and growth-bound checks
/// when `Λ` and `φ` are available.
pub fn crosscheck(spec: &ModelSpec, opts: &CrossCheckOptions, battery: &BatteryOptions) -> Result<CrossCheckReport> {
    let (mut report, sol) = criterion_with_solution(spec, opts)?;
    let Some(sol) = sol else {
        return Ok(report);
    };
    let lambda = sol.lambda + battery.lambda_shift;
    match sol.phi_interpolant() {
        Ok(phi) => match check_martingale(
            spec,
            lambda,
            &phi,
            opts.x0,
            &battery.martingale_times,
            battery.martingale_replicas,
            opts.seed,
        ) {
            Ok(m) => {
                let worst = m.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
                report.verdicts.push(Verdict::from_bool("martingale", m.passed, format!("max |z| = {worst:.2}")));
                report.martingale = Some(m);
            }
            Err(e) => report.verdicts.push(Verdict::new("martingale", Status::NotRun, e.to_string())),
        },
        Err(e) => report.verdicts.push(Verdict::new("martingale", Status::NotRun, e.to_string())),
    }
    match check_growth_bound(spec, lambda, opts.x0, &battery.growth_times, battery.growth_replicas, opts.seed) {
        Ok(g) => {
            report.verdicts.push(Verdict::from_bool(
                "growth-bound",
                g.passed,
                format!("band [{:.3}, {:.3}], log slope {:.4}", g.lower, g.upper, g.log_slope),
            ));
            report.growth_bound = Some(g);
        }
        Err(e) => report.verdicts.push(Verdict::new("growth-bound", Status::NotRun, e.to_string())),
    }
    Ok(report)
}
