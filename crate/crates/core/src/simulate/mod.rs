//! Exact event-driven simulation of the branching population.
//!
//! Each individual grows deterministically along the flow until its first
//! event: a division (hazard `b(A_t x)`, sampled by thinning against `b̄`) or
//! a death (rate `D`). Individuals never interact, so every one draws its own
//! event from a random stream keyed by its lineage path, and the population
//! is advanced through a min-heap of absolute event times.

mod lineage;

pub use lineage::{LineagePath, StreamKey};

use crate::error::{GrowFragError, Result};
use crate::model::ModelSpec;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

/// Thinning candidates allowed per individual before giving up; only
/// reachable when the division rate vanishes on the flow's limit.
const MAX_CANDIDATES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    /// Mass at birth.
    pub mass: f64,
    /// Absolute birth time.
    pub clock_origin: f64,
    pub path: LineagePath,
    #[serde(skip)]
    key: Option<StreamKey>,
}

impl Individual {
    pub fn new(mass: f64, clock_origin: f64, path: LineagePath, key: StreamKey) -> Self {
        Self { mass, clock_origin, path, key: Some(key) }
    }

    pub fn stream_key(&self) -> Option<StreamKey> {
        self.key
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// Division into fractions `alpha` (left child) and `1 - alpha`.
    Division {
        alpha: f64,
    },
    Death,
}

/// Time and kind of an individual's first event, relative to its birth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstEvent {
    pub delay: f64,
    pub kind: EventKind,
    /// Mass reached at the event.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub mass: f64,
    pub parent: String,
    pub children: Vec<String>,
    pub child_masses: Vec<f64>,
}

/// Samples the first event of an individual of mass `x`, or `None` if it
/// would happen after `limit`.
pub fn first_event_before<R: Rng + ?Sized>(
    spec: &ModelSpec,
    x: f64,
    limit: f64,
    rng: &mut R,
) -> Result<Option<FirstEvent>> {
    let m = spec.max_mass;
    if !(x > 0.0 && x < m) {
        return Err(GrowFragError::Domain { what: "mass", value: x, lo: 0.0, hi: m });
    }
    let d = spec.death_rate;
    let bbar = spec.max_division_rate();
    if d <= 0.0 && bbar <= 0.0 {
        return Err(GrowFragError::NoEventPossible);
    }
    let death = if d > 0.0 { Exp::new(d).expect("positive rate").sample(rng) } else { f64::INFINITY };
    let stop = death.min(limit);
    if bbar > 0.0 {
        let candidates = Exp::new(bbar).expect("positive rate");
        let mut t = 0.0;
        for _ in 0..MAX_CANDIDATES {
            t += candidates.sample(rng);
            if t >= stop {
                break;
            }
            let mass = spec.flow(x, t)?;
            let u: f64 = rng.random();
            if u * bbar < spec.division_rate(mass) {
                let alpha = spec.kernel.sample(rng);
                return Ok(Some(FirstEvent { delay: t, kind: EventKind::Division { alpha }, mass }));
            }
        }
        if t < stop {
            return Err(GrowFragError::NoEventPossible);
        }
    }
    if death <= limit {
        return Ok(Some(FirstEvent { delay: death, kind: EventKind::Death, mass: spec.flow(x, death)? }));
    }
    Ok(None)
}

/// First event without a time limit.
pub fn first_event<R: Rng + ?Sized>(spec: &ModelSpec, x: f64, rng: &mut R) -> Result<FirstEvent> {
    first_event_before(spec, x, f64::INFINITY, rng)?.ok_or(GrowFragError::NoEventPossible)
}

/// Child masses `(α A, (1-α) A)` summing to `A` exactly: the larger share is
/// computed first, and the remainder `A - big` is exact because `big ≥ A/2`.
pub fn split_mass(mass: f64, alpha: f64) -> (f64, f64) {
    let big = alpha.max(1.0 - alpha) * mass;
    let small = mass - big;
    if alpha >= 0.5 {
        (big, small)
    } else {
        (small, big)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub horizon: f64,
    pub max_pop: usize,
    pub max_events: usize,
    /// Count reaching `max_pop` as survival.
    pub survival_proxy: bool,
    /// Times at which `N_t` and weighted sums are recorded; sorted ascending.
    pub sample_times: Vec<f64>,
    pub record_events: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            max_pop: 500,
            max_events: 10_000_000,
            survival_proxy: true,
            sample_times: Vec::new(),
            record_events: false,
        }
    }
}

impl SimulationOptions {
    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(GrowFragError::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.max_pop == 0 || self.max_events == 0 {
            return Err(GrowFragError::InvalidArgument("population and event caps must be positive".into()));
        }
        if self.sample_times.iter().any(|&t| !(t >= 0.0) || t > self.horizon)
            || self.sample_times.windows(2).any(|w| w[1] < w[0])
        {
            return Err(GrowFragError::InvalidArgument("sample times must be sorted and lie in [0, horizon]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    Extinction,
    PopulationCap,
    EventCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub replica: u64,
    /// Alive at the horizon, or population cap reached with the proxy on.
    pub survived: bool,
    pub extinction_time: Option<f64>,
    pub stop: StopReason,
    /// A cap stopped the run before the horizon.
    pub truncated: bool,
    pub stop_time: f64,
    pub final_population: usize,
    pub events: usize,
    /// `N_t` at the sample times; `None` after a truncation.
    pub population_counts: Vec<Option<usize>>,
    /// `⟨η_t, f⟩` per weight function and sample time.
    pub weighted: Vec<Vec<Option<f64>>>,
    pub log: Vec<EventRecord>,
}

pub type WeightFn<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

struct Pending {
    individual: Individual,
    event: Option<FirstEvent>,
}

/// Runs replica `replica` of the process started from one individual of
/// mass `x0`.
pub fn simulate_replica(
    spec: &ModelSpec,
    x0: f64,
    opts: &SimulationOptions,
    weights: &[WeightFn<'_>],
    seed: u64,
    replica: u64,
) -> Result<SimulationSummary> {
    opts.validate()?;
    let horizon = opts.horizon;
    let mut alive: HashMap<u64, Pending> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    let mut next_slot = 0u64;
    let mut add = |ind: Individual,
                   alive: &mut HashMap<u64, Pending>,
                   heap: &mut BinaryHeap<Reverse<(u64, u64)>>|
     -> Result<()> {
        let mut rng = ind.key.expect("simulated individuals carry a key").rng();
        let event = first_event_before(spec, ind.mass, horizon - ind.clock_origin, &mut rng)?;
        if let Some(ev) = event {
            // absolute times are non-negative, so their bit patterns sort like the values
            heap.push(Reverse(((ind.clock_origin + ev.delay).to_bits(), next_slot)));
        }
        alive.insert(next_slot, Pending { individual: ind, event });
        next_slot += 1;
        Ok(())
    };

    let root = Individual::new(x0, 0.0, LineagePath::root(replica), StreamKey::root(seed, replica));
    add(root, &mut alive, &mut heap)?;

    let ns = opts.sample_times.len();
    let mut population_counts = vec![None; ns];
    let mut weighted = vec![vec![None; ns]; weights.len()];
    let mut next_sample = 0;
    let mut log = Vec::new();
    let mut events = 0usize;

    let snapshot =
        |t: f64, alive: &HashMap<u64, Pending>, out_w: &mut Vec<Vec<Option<f64>>>, k: usize| -> Result<usize> {
            let mut sums = vec![0.0; weights.len()];
            let mut slots: Vec<&u64> = alive.keys().collect();
            slots.sort_unstable();
            for slot in slots {
                let ind = &alive[slot].individual;
                let mass = spec.flow(ind.mass, t - ind.clock_origin)?;
                for (s, f) in sums.iter_mut().zip(weights) {
                    *s += f(mass);
                }
            }
            for (w, s) in out_w.iter_mut().zip(sums) {
                w[k] = Some(s);
            }
            Ok(alive.len())
        };

    let mut stop = StopReason::Horizon;
    let mut stop_time = horizon;
    let mut extinction_time = None;
    while let Some(Reverse((bits, slot))) = heap.pop() {
        let time = f64::from_bits(bits);
        while next_sample < ns && opts.sample_times[next_sample] < time {
            population_counts[next_sample] =
                Some(snapshot(opts.sample_times[next_sample], &alive, &mut weighted, next_sample)?);
            next_sample += 1;
        }
        let Pending { individual: parent, event } = alive.remove(&slot).expect("scheduled individual is alive");
        let ev = event.expect("scheduled individual has an event");
        events += 1;
        match ev.kind {
            EventKind::Death => {
                if opts.record_events {
                    log.push(EventRecord {
                        time,
                        kind: ev.kind,
                        mass: ev.mass,
                        parent: parent.path.to_string(),
                        children: Vec::new(),
                        child_masses: Vec::new(),
                    });
                }
            }
            EventKind::Division { alpha } => {
                let (left, right) = split_mass(ev.mass, alpha);
                let key = parent.key.expect("simulated individuals carry a key");
                let kids = [
                    Individual::new(left, time, parent.path.child(0), key.child(0)),
                    Individual::new(right, time, parent.path.child(1), key.child(1)),
                ];
                if opts.record_events {
                    log.push(EventRecord {
                        time,
                        kind: ev.kind,
                        mass: ev.mass,
                        parent: parent.path.to_string(),
                        children: kids.iter().map(|k| k.path.to_string()).collect(),
                        child_masses: vec![left, right],
                    });
                }
                for kid in kids {
                    add(kid, &mut alive, &mut heap)?;
                }
            }
        }
        if alive.is_empty() {
            stop = StopReason::Extinction;
            stop_time = time;
            extinction_time = Some(time);
            break;
        }
        if alive.len() >= opts.max_pop {
            stop = StopReason::PopulationCap;
            stop_time = time;
            break;
        }
        if events >= opts.max_events {
            stop = StopReason::EventCap;
            stop_time = time;
            break;
        }
    }
    let truncated = matches!(stop, StopReason::PopulationCap | StopReason::EventCap);
    while next_sample < ns {
        let t = opts.sample_times[next_sample];
        if extinction_time.is_some_and(|te| t >= te) {
            population_counts[next_sample] = Some(0);
            for w in weighted.iter_mut() {
                w[next_sample] = Some(0.0);
            }
        } else if !truncated {
            population_counts[next_sample] = Some(snapshot(t, &alive, &mut weighted, next_sample)?);
        }
        next_sample += 1;
    }
    let survived = match stop {
        StopReason::Horizon => true,
        StopReason::Extinction => false,
        StopReason::PopulationCap => opts.survival_proxy,
        StopReason::EventCap => false,
    };
    Ok(SimulationSummary {
        seed,
        replica,
        survived,
        extinction_time,
        stop,
        truncated,
        stop_time,
        final_population: alive.len(),
        events,
        population_counts,
        weighted,
        log,
    })
}

/// Replica 0 of [`simulate_replica`].
pub fn simulate(
    spec: &ModelSpec,
    x0: f64,
    opts: &SimulationOptions,
    weights: &[WeightFn<'_>],
    seed: u64,
) -> Result<SimulationSummary> {
    simulate_replica(spec, x0, opts, weights, seed, 0)
}

/// Runs replicas `0..replicas` in parallel; the output is in replica order
/// and does not depend on the number of worker threads.
pub fn simulate_many(
    spec: &ModelSpec,
    x0: f64,
    opts: &SimulationOptions,
    weights: &[WeightFn<'_>],
    replicas: usize,
    seed: u64,
) -> Result<Vec<SimulationSummary>> {
    (0..replicas as u64).into_par_iter().map(|r| simulate_replica(spec, x0, opts, weights, seed, r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub replicas: usize,
    pub survived: usize,
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p̂ (1 - p̂) / n)`.
    pub std_error: f64,
    /// Half-width of the 95% Wald interval.
    pub ci_halfwidth: f64,
    /// Replicas counted as survivors because they hit the population cap.
    pub capped: usize,
    /// Replicas stopped by the event cap.
    pub event_capped: usize,
}

impl SurvivalEstimate {
    pub fn ci_excludes_zero(&self) -> bool {
        self.p_hat - self.ci_halfwidth > 0.0
    }
}

pub fn estimate_survival(
    spec: &ModelSpec,
    x0: f64,
    opts: &SimulationOptions,
    replicas: usize,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if replicas == 0 {
        return Err(GrowFragError::InvalidArgument("at least one replica is needed".into()));
    }
    let opts = SimulationOptions { sample_times: Vec::new(), record_events: false, ..opts.clone() };
    let runs = simulate_many(spec, x0, &opts, &[], replicas, seed)?;
    Ok(survival_from_runs(&runs))
}

pub fn survival_from_runs(runs: &[SimulationSummary]) -> SurvivalEstimate {
    let n = runs.len();
    let survived = runs.iter().filter(|r| r.survived).count();
    let p = survived as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    SurvivalEstimate {
        replicas: n,
        survived,
        p_hat: p,
        std_error: se,
        ci_halfwidth: 1.96 * se,
        capped: runs.iter().filter(|r| r.stop == StopReason::PopulationCap).count(),
        event_capped: runs.iter().filter(|r| r.stop == StopReason::EventCap).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEstimate {
    pub time: f64,
    pub mean: f64,
    pub std_error: f64,
    pub ci_halfwidth: f64,
}

/// Estimates `E[Σ_i f(X_t^i)]` at each time from `replicas` runs without a
/// population cap. Fails if any replica hits the event cap.
pub fn weighted_expectation(
    spec: &ModelSpec,
    x0: f64,
    f: WeightFn<'_>,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<WeightedEstimate>> {
    if replicas < 2 {
        return Err(GrowFragError::InvalidArgument("at least two replicas are needed".into()));
    }
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let opts = SimulationOptions {
        horizon: if horizon > 0.0 { horizon } else { 1.0 },
        max_pop: usize::MAX,
        max_events: 100_000_000,
        survival_proxy: false,
        sample_times: times.to_vec(),
        record_events: false,
    };
    let runs = simulate_many(spec, x0, &opts, &[f], replicas, seed)?;
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let values: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.weighted[0][k].ok_or_else(|| {
                    GrowFragError::numerical(
                        "weighted expectation",
                        format!("replica {} truncated before t = {t}", r.replica),
                    )
                })
            })
            .collect::<Result<_>>()?;
        out.push(mean_with_error(t, &values));
    }
    Ok(out)
}

/// Sample mean with its standard error.
pub fn mean_with_error(time: f64, values: &[f64]) -> WeightedEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    WeightedEstimate { time, mean, std_error: se, ci_halfwidth: 1.96 * se }
}
