//! Time mesh along the single growth trajectory that passes through every
//! grid node.
//!
//! The flow is autonomous, so the trajectory started at node `y_j` is a time
//! shift of the trajectory started at the smallest node. Every time integral
//! of the form `∫_0^∞ F(A_t(y_j)) e^{-c t - ∫_0^t b(A_s(y_j)) ds} dt` is then a
//! tail integral of one shared trajectory, computed for all nodes at once by
//! a backward recursion over Simpson pairs.

use crate::error::{GrowFragError, Result};
use crate::model::{HittingTime, ModelSpec};
use crate::quadrature::{fitted_simpson_weights, GaussLegendre};

/// Mesh construction parameters.
#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    /// Largest sub-step between grid nodes.
    pub max_step: f64,
    /// Decay rate assumed on top of the hazard when deciding where the tail
    /// can be cut.
    pub tail_rate: f64,
    /// Required log-decay `-ln(tail tolerance)` at the end of the mesh.
    pub tail_log_decay: f64,
    /// Hard cap on the tail length.
    pub tail_cap: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { max_step: 0.02, tail_rate: 0.0, tail_log_decay: (1e10f64).ln(), tail_cap: 1e4 }
    }
}

/// One Simpson pair. The mean hazard slope over the pair is folded into the
/// exponential fitting so that only the variation of `b` around it is left
/// to the quadratic interpolant.
#[derive(Debug, Clone)]
struct Pair {
    h: f64,
    slope: f64,
    /// `e^{-(H(s+h) - H(s)) + slope h}`
    mid_factor: f64,
}

#[derive(Debug, Clone)]
pub struct Characteristic {
    times: Vec<f64>,
    masses: Vec<f64>,
    hazard: Vec<f64>,
    node_pos: Vec<usize>,
    pairs: Vec<Pair>,
    tail_truncated: bool,
}

impl Characteristic {
    pub fn build(spec: &ModelSpec, nodes: &[f64], opts: MeshOptions) -> Result<Self> {
        if nodes.is_empty() {
            return Err(GrowFragError::InvalidArgument("characteristic mesh needs nodes".into()));
        }
        let first = nodes[0];
        let last = *nodes.last().unwrap();
        if !(first > 0.0 && last < spec.max_mass) {
            return Err(GrowFragError::InvalidArgument("grid nodes must be interior to (0, M)".into()));
        }
        // anchors: grid nodes plus breakpoints of b strictly between them
        let mut anchors: Vec<(f64, Option<usize>)> = nodes.iter().enumerate().map(|(j, &x)| (x, Some(j))).collect();
        for bp in spec.division.breakpoints() {
            if bp > first && bp < last && !nodes.iter().any(|&x| (x - bp).abs() <= 1e-14 * spec.max_mass) {
                anchors.push((bp, None));
            }
        }
        anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let gl = GaussLegendre::new(5);
        let mut times = vec![0.0];
        let mut masses = vec![first];
        let mut hazard = vec![0.0];
        let mut node_pos = vec![0usize; nodes.len()];
        node_pos[0] = 0;

        let push_step = |times: &mut Vec<f64>,
                         masses: &mut Vec<f64>,
                         hazard: &mut Vec<f64>,
                         h: f64,
                         next_mass: Option<f64>|
         -> Result<()> {
            let from = *masses.last().unwrap();
            let t0 = *times.last().unwrap();
            let mut dh = 0.0;
            for (tau, w) in gl.on_interval(0.0, h) {
                dh += w * spec.division_rate(spec.flow(from, tau)?);
            }
            let to = match next_mass {
                Some(m) => m,
                None => spec.flow(from, h)?,
            };
            times.push(t0 + h);
            masses.push(to);
            hazard.push(hazard.last().unwrap() + dh);
            Ok(())
        };

        for w in anchors.windows(2) {
            let (from, _) = w[0];
            let (to, node) = w[1];
            let dur = match spec.hitting_time(from, to)? {
                HittingTime::Finite(t) => t,
                HittingTime::Never => {
                    return Err(GrowFragError::numerical(
                        "characteristic mesh",
                        format!("{to} unreachable from {from}"),
                    ))
                }
            };
            let m = 2 * ((dur / (2.0 * opts.max_step)).ceil() as usize).max(1);
            let h = dur / m as f64;
            for k in 1..=m {
                // sub-node masses from the segment start keep drift out of long segments
                let exact = if k == m { to } else { spec.flow(from, k as f64 * h)? };
                push_step(&mut times, &mut masses, &mut hazard, h, Some(exact))?;
            }
            if let Some(j) = node {
                node_pos[j] = times.len() - 1;
            }
        }

        // tail beyond the largest node
        let s_last = *times.last().unwrap();
        let h_last = *hazard.last().unwrap();
        let mut h = opts.max_step;
        let mut tail_truncated = false;
        loop {
            let s = *times.last().unwrap();
            let decay = (hazard.last().unwrap() - h_last) + opts.tail_rate * (s - s_last);
            if decay >= opts.tail_log_decay && s > s_last {
                break;
            }
            if s - s_last >= opts.tail_cap {
                tail_truncated = true;
                break;
            }
            for _ in 0..2 {
                push_step(&mut times, &mut masses, &mut hazard, h, None)?;
            }
            // keep the hazard increment per sub-step small while it is active
            let b_now = spec.division_rate(*masses.last().unwrap());
            let limit = if b_now > 0.0 { (2.5 * opts.max_step / b_now).max(opts.max_step) } else { f64::INFINITY };
            h = (h * 1.2).min(opts.tail_cap / 50.0).min(limit).max(opts.max_step);
        }

        let pairs = (0..(times.len() - 1) / 2)
            .map(|p| {
                let k = 2 * p;
                let h = times[k + 1] - times[k];
                let slope = (hazard[k + 2] - hazard[k]) / (2.0 * h);
                Pair { h, slope, mid_factor: (-(hazard[k + 1] - hazard[k]) + slope * h).exp() }
            })
            .collect();
        Ok(Self { times, masses, hazard, node_pos, pairs, tail_truncated })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn hazard(&self) -> &[f64] {
        &self.hazard
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mesh index of grid node `j`.
    pub fn node_position(&self, j: usize) -> usize {
        self.node_pos[j]
    }

    /// Time at which the shared trajectory passes grid node `j`.
    pub fn node_time(&self, j: usize) -> f64 {
        self.times[self.node_pos[j]]
    }

    /// Whether the tail hit its length cap before the integrands decayed.
    pub fn tail_truncated(&self) -> bool {
        self.tail_truncated
    }

    /// Tail integrals `T(s_k) = ∫_{s_k}^{end} f(s) e^{-rate (s - s_k) - (H(s) - H(s_k))} ds`
    /// at every pair start `k` (even mesh indices), indexed by `k / 2`; the
    /// final entry is the empty integral at the end of the mesh.
    pub fn tail_integrals(&self, rate: f64, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.times.len());
        let np = self.pairs.len();
        let mut out = vec![0.0; np + 1];
        for p in (0..np).rev() {
            let pair = &self.pairs[p];
            let k = 2 * p;
            let c = rate + pair.slope;
            let w = fitted_simpson_weights(pair.h, c);
            let local = w[0] * f[k] + w[1] * f[k + 1] * pair.mid_factor + w[2] * f[k + 2];
            let carry = (-c * 2.0 * pair.h).exp();
            out[p] = local + carry * out[p + 1];
        }
        out
    }

    /// Tail integral at grid node `j`, read from the output of [`Self::tail_integrals`].
    pub fn at_node(&self, tails: &[f64], j: usize) -> f64 {
        tails[self.node_pos[j] / 2]
    }

    /// `exp(-(rate (s_b - s_a) + H(s_b) - H(s_a)))` between mesh indices.
    pub fn survival_between(&self, rate: f64, a: usize, b: usize) -> f64 {
        (-(rate * (self.times[b] - self.times[a]) + self.hazard[b] - self.hazard[a])).exp()
    }
}
