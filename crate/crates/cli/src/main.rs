//! `growfrag` command-line front end.

mod output;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use growfrag::config::{RunConfig, WeightName, DEFAULT_CONFIG};
use growfrag::eigen::{EigenSolution, EigenSolver};
use growfrag::extinction::{dichotomy, solve_extinction, Dichotomy};
use growfrag::interp::MonotoneCubic;
use growfrag::model::audit_hypotheses;
use growfrag::pde::{PdeSolver, PdeState};
use growfrag::simulate::{mean_with_error, simulate_many, survival_from_runs, EventKind, SurvivalEstimate};
use growfrag::validate::crosscheck;
use growfrag::{GrowFragError, MassGrid};
use output::{pretty_json, Cell, Csv, Sink};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "growfrag", version, about = "Invasion fitness for growth-fragmentation-death models")]
struct Cli {
    /// TOML configuration; omitted sections take the defaults listed below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true, env = "GROWFRAG_SEED")]
    seed: Option<u64>,
    /// Worker threads (wall time only; results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for JSON and CSV outputs; without it only stdout is written.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Grid size; overrides grid.n.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the model hypotheses on the grid.
    Audit,
    /// Monte Carlo simulation of the branching population.
    Simulate(SimulateArgs),
    /// Extinction probability profile by Picard iteration.
    Extinction,
    /// Principal eigenvalue Λ with the profiles u and φ.
    Eigen,
    /// Transient finite-volume solution and its growth rate.
    Pde(PdeArgs),
    /// All routes against each other, plus the martingale and growth-bound checks.
    Crosscheck,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    max_pop: Option<usize>,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Weight function for ⟨η_t, f⟩: one, mass or phi.
    #[arg(long)]
    weight: Option<String>,
    /// CSV with columns x and phi, used by --weight phi.
    #[arg(long)]
    phi_file: Option<PathBuf>,
    /// Write the event log of every replica.
    #[arg(long)]
    record_events: bool,
}

#[derive(Args, Debug)]
struct PdeArgs {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Record every k-th step in the time series.
    #[arg(long)]
    cadence: Option<usize>,
}

enum Failure {
    /// Usage or configuration problem (exit 2).
    Usage(String),
    /// A check failed or a solver did not converge (exit 1).
    Check(String),
}

impl From<GrowFragError> for Failure {
    fn from(e: GrowFragError) -> Self {
        match e {
            GrowFragError::Config(_) | GrowFragError::InvalidModel(_) | GrowFragError::InvalidArgument(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(format!("writing output: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let help = format!("Configuration keys and defaults:\n\n{DEFAULT_CONFIG}");
    let matches = Cli::command().after_long_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("growfrag: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("growfrag: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::Usage(format!("config file not found: {}", path.display())));
            }
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.n {
        cfg.grid.n = n;
    }
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {w} workers: {e}")))?;
    }
    let mut sink = Sink::new(cli.out_dir.clone());
    match cli.command {
        Command::Audit => audit(&cfg, &mut sink),
        Command::Simulate(args) => simulate(&mut cfg, args, &mut sink),
        Command::Extinction => extinction(&cfg, &mut sink),
        Command::Eigen => eigen(&cfg, &mut sink),
        Command::Pde(args) => pde(&mut cfg, args, &mut sink),
        Command::Crosscheck => cross(&cfg, &mut sink),
    }
}

fn emit_json<T: Serialize>(sink: &mut Sink, name: &str, value: &T) -> Result<(), Failure> {
    let text = pretty_json(value);
    print!("{text}");
    sink.put(name, &text)?;
    Ok(())
}

fn audit(cfg: &RunConfig, sink: &mut Sink) -> Outcome {
    let spec = cfg.model()?;
    let grid = cfg.grid()?;
    let report = audit_hypotheses(&spec, &grid);
    emit_json(sink, "audit.json", &report)?;
    for c in report.violations() {
        eprintln!("growfrag: hypothesis {} violated: {}", c.name, c.note);
    }
    Ok(report.all_passed)
}

#[derive(Serialize)]
struct WeightedSummary {
    time: f64,
    mean: Option<f64>,
    std_error: Option<f64>,
    truncated_replicas: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    x0: f64,
    horizon: f64,
    max_pop: usize,
    weight: WeightName,
    survival: SurvivalEstimate,
    mean_population: Vec<WeightedSummary>,
    weighted: Vec<WeightedSummary>,
}

fn read_phi(path: &Path) -> Result<MonotoneCubic, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Failure::Usage(format!("{} has no column {name:?}", path.display())))
    };
    let (ix, iphi) = (col("x")?, col("phi")?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| {
            cells
                .get(i)
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::Usage(format!("{}: bad value on line {}", path.display(), k + 2)))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iphi)?);
    }
    Ok(MonotoneCubic::new(xs, ys)?)
}

fn summarize_weighted(times: &[f64], column: impl Fn(usize) -> Vec<Option<f64>>) -> Vec<WeightedSummary> {
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let values = column(k);
            let truncated = values.iter().filter(|v| v.is_none()).count();
            let complete: Vec<f64> = values.into_iter().flatten().collect();
            let est = (truncated == 0 && complete.len() >= 2).then(|| mean_with_error(t, &complete));
            WeightedSummary {
                time: t,
                mean: est.as_ref().map(|e| e.mean),
                std_error: est.as_ref().map(|e| e.std_error),
                truncated_replicas: truncated,
            }
        })
        .collect()
}

fn simulate(cfg: &mut RunConfig, args: SimulateArgs, sink: &mut Sink) -> Outcome {
    let s = &mut cfg.simulate;
    if let Some(v) = args.x0 {
        s.x0 = v;
    }
    if let Some(v) = args.horizon {
        s.horizon = v;
    }
    if let Some(v) = args.replicas {
        s.replicas = v;
    }
    if let Some(v) = args.max_pop {
        s.max_pop = v;
    }
    if let Some(v) = args.times {
        s.sample_times = v;
    }
    if let Some(w) = args.weight {
        s.weight = match w.as_str() {
            "one" => WeightName::One,
            "mass" => WeightName::Mass,
            "phi" => WeightName::Phi,
            other => return Err(Failure::Usage(format!("unknown weight {other:?}; use one, mass or phi"))),
        };
    }
    if let Some(p) = args.phi_file {
        s.phi_file = Some(p.display().to_string());
    }
    s.record_events |= args.record_events;
    let s = cfg.simulate.clone();
    let spec = cfg.model()?;
    if s.replicas == 0 {
        return Err(Failure::Usage("simulate.replicas must be positive".into()));
    }
    let phi = match s.weight {
        WeightName::Phi => {
            let path = s
                .phi_file
                .as_ref()
                .ok_or_else(|| Failure::Usage("weight phi needs simulate.phi_file or --phi-file".into()))?;
            Some(read_phi(Path::new(path))?)
        }
        _ => None,
    };
    let weight = move |x: f64| match (&phi, s.weight) {
        (Some(p), _) => p.eval_clamped(x),
        (None, WeightName::Mass) => x,
        _ => 1.0,
    };
    let opts = s.options();
    let runs = simulate_many(&spec, s.x0, &opts, &[&weight], s.replicas, cfg.seed)?;

    let times = &opts.sample_times;
    let mut header = vec!["replica", "survived", "stop", "extinction_time", "stop_time", "events", "final_population"];
    let labels: Vec<String> =
        times.iter().map(|t| format!("N_{t}")).chain(times.iter().map(|t| format!("w_{t}"))).collect();
    header.extend(labels.iter().map(|s| s.as_str()));
    let mut table = Csv::new(&header);
    for r in &runs {
        let stop = serde_json::to_value(r.stop).expect("stop reason serialises");
        let mut cells: Vec<Cell> = vec![
            r.replica.into(),
            r.survived.into(),
            stop.as_str().unwrap_or("").into(),
            r.extinction_time.into(),
            r.stop_time.into(),
            r.events.into(),
            r.final_population.into(),
        ];
        cells.extend(r.population_counts.iter().map(|&c| Cell::from(c)));
        cells.extend(r.weighted[0].iter().map(|&w| Cell::from(w)));
        table.row(&cells);
    }
    sink.put("simulate_replicas.csv", &table.render())?;

    if opts.record_events {
        let mut log = Csv::new(&["replica", "time", "kind", "alpha", "mass", "parent", "children", "child_masses"]);
        for r in &runs {
            for ev in &r.log {
                let (kind, alpha) = match ev.kind {
                    EventKind::Division { alpha } => ("division", Some(alpha)),
                    EventKind::Death => ("death", None),
                };
                let masses: Vec<String> = ev.child_masses.iter().map(|m| m.to_string()).collect();
                log.row(&[
                    r.replica.into(),
                    ev.time.into(),
                    kind.into(),
                    alpha.into(),
                    ev.mass.into(),
                    ev.parent.as_str().into(),
                    ev.children.join(" ").as_str().into(),
                    masses.join(" ").as_str().into(),
                ]);
            }
        }
        sink.put("simulate_events.csv", &log.render())?;
    }

    let summary = SimulateSummary {
        seed: cfg.seed,
        x0: s.x0,
        horizon: opts.horizon,
        max_pop: opts.max_pop,
        weight: s.weight,
        survival: survival_from_runs(&runs),
        mean_population: summarize_weighted(times, |k| {
            runs.iter().map(|r| r.population_counts[k].map(|c| c as f64)).collect()
        }),
        weighted: summarize_weighted(times, |k| runs.iter().map(|r| r.weighted[0][k]).collect()),
    };
    emit_json(sink, "simulate.json", &summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct ExtinctionSummary {
    death_rate: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    monotonicity_violation: f64,
    min: f64,
    max: f64,
    dichotomy: Dichotomy,
}

fn extinction(cfg: &RunConfig, sink: &mut Sink) -> Outcome {
    let spec = cfg.model()?;
    let grid = cfg.grid()?;
    let p = solve_extinction(&spec, &grid, cfg.extinction.options())?;
    let mut table = Csv::new(&["x", "p"]);
    for (&x, &v) in grid.nodes().iter().zip(&p.values) {
        table.row(&[x.into(), v.into()]);
    }
    sink.put("extinction.csv", &table.render())?;
    let summary = ExtinctionSummary {
        death_rate: spec.death_rate,
        iterations: p.iterations,
        converged: p.converged,
        residual: p.residual,
        monotonicity_violation: p.monotonicity_violation,
        min: p.values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: p.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        dichotomy: dichotomy(&p, 1e-3),
    };
    emit_json(sink, "extinction.json", &summary)?;
    Ok(p.converged)
}

#[derive(Serialize)]
struct EigenSummary<'a> {
    lambda: f64,
    lambda0: f64,
    death_rate: f64,
    epsilon: f64,
    converged: bool,
    phi_converged: bool,
    rayleigh_quotient: f64,
    stationary_residual: f64,
    phi_at_zero: f64,
    phi_at_max: f64,
    epsilon_trace: &'a [(f64, f64)],
    mu_trace: &'a [(f64, f64)],
}

fn eigen_table(grid: &MassGrid, sol: &EigenSolution) -> String {
    let mut table = Csv::new(&["x", "u", "phi", "psi"]);
    table.row(&[0.0.into(), 0.0.into(), sol.phi_at_zero.into(), 0.0.into()]);
    for (i, &x) in grid.nodes().iter().enumerate() {
        table.row(&[x.into(), sol.u[i].into(), sol.phi[i].into(), sol.psi[i].into()]);
    }
    table.row(&[grid.max_mass().into(), Cell::Empty, sol.phi_at_max.into(), Cell::Empty]);
    table.render()
}

fn eigen(cfg: &RunConfig, sink: &mut Sink) -> Outcome {
    let spec = cfg.model()?;
    let grid = cfg.grid()?;
    let sol = EigenSolver::new(&spec, &grid, cfg.eigen.clone())?.solve()?;
    sink.put("eigen.csv", &eigen_table(&grid, &sol))?;
    let summary = EigenSummary {
        lambda: sol.lambda,
        lambda0: sol.lambda0,
        death_rate: sol.death_rate,
        epsilon: sol.epsilon,
        converged: sol.converged,
        phi_converged: sol.phi_converged,
        rayleigh_quotient: sol.rayleigh_quotient,
        stationary_residual: sol.stationary_residual,
        phi_at_zero: sol.phi_at_zero,
        phi_at_max: sol.phi_at_max,
        epsilon_trace: &sol.epsilon_trace,
        mu_trace: &sol.mu_trace,
    };
    emit_json(sink, "eigen.json", &summary)?;
    if !sol.converged {
        eprintln!("growfrag: ε continuation exhausted its schedule before reaching the tolerance");
    }
    Ok(sol.converged)
}

#[derive(Serialize)]
struct PdeSummary {
    horizon: f64,
    dt: f64,
    lambda_hat: f64,
    stabilization: f64,
}

fn pde(cfg: &mut RunConfig, args: PdeArgs, sink: &mut Sink) -> Outcome {
    if let Some(v) = args.horizon {
        cfg.pde.horizon = v;
    }
    if args.dt.is_some() {
        cfg.pde.dt = args.dt;
    }
    if let Some(v) = args.cadence {
        cfg.pde.cadence = v;
    }
    let spec = cfg.model()?;
    let grid = cfg.grid()?;
    let solver = PdeSolver::new(&spec, &grid, cfg.pde.cfl)?;
    let r0 = PdeState::default_initial(&grid)?;
    let run = solver.run(&r0, cfg.pde.horizon, cfg.pde.dt, cfg.pde.cadence)?;
    let mut series = Csv::new(&["t", "log_total", "lambda_running"]);
    for s in &run.samples {
        series.row(&[s.time.into(), s.log_total.into(), s.lambda_running.into()]);
    }
    sink.put("pde_series.csv", &series.render())?;
    let mut profile = Csv::new(&["x", "r"]);
    for (&x, &v) in grid.nodes().iter().zip(&run.state.profile()) {
        profile.row(&[x.into(), v.into()]);
    }
    sink.put("pde_profile.csv", &profile.render())?;
    let summary = PdeSummary {
        horizon: cfg.pde.horizon,
        dt: run.dt,
        lambda_hat: run.lambda_hat,
        stabilization: run.stabilization,
    };
    emit_json(sink, "pde.json", &summary)?;
    Ok(true)
}

fn cross(cfg: &RunConfig, sink: &mut Sink) -> Outcome {
    let spec = cfg.model()?;
    let (opts, battery) = cfg.crosscheck_options();
    let report = crosscheck(&spec, &opts, &battery)?;
    emit_json(sink, "crosscheck.json", &report)?;
    for v in &report.verdicts {
        eprintln!("{:<20} {:?}: {}", v.name, v.status, v.detail);
    }
    Ok(report.passed())
}
