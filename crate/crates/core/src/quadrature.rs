//! Quadrature rules: Gauss–Legendre, composite Simpson, and an
//! exponentially fitted Simpson rule for integrands of the form
//! `F(s) e^{-c s}` with smooth `F`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&z, &w)| (mid + half * z, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals of [a, b].
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Simpson over `2 * pairs` equal sub-intervals of [a, b].
pub fn simpson(a: f64, b: f64, pairs: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = 2 * pairs.max(1);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let c = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Weights `(w0, w1, w2)` such that
/// `∫_0^{2h} F(s) e^{-c s} ds ≈ w0 F(0) + w1 F(h) + w2 F(2h)`,
/// exact when `F` is quadratic. Reduces to Simpson at `c = 0`.
///
/// For very stiff pairs the quadratic weights can turn negative; in that case
/// the piecewise-linear fitted rule on the two halves is returned instead,
/// whose weights are always non-negative.
pub fn fitted_simpson_weights(h: f64, c: f64) -> [f64; 3] {
    let span = 2.0 * h;
    let [m0, m1, m2] = exp_moments(span, c);
    let h2 = h * h;
    let w0 = (m2 - 3.0 * h * m1 + 2.0 * h2 * m0) / (2.0 * h2);
    let w1 = -(m2 - 2.0 * h * m1) / h2;
    let w2 = (m2 - h * m1) / (2.0 * h2);
    if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
        return [w0, w1, w2];
    }
    let [l0, l1] = fitted_trapezoid_weights(h, c);
    let decay = (-c * h).exp();
    [l0, l1 + decay * l0, decay * l1]
}

/// Weights for `∫_0^h F(s) e^{-c s} ds` with `F` linear.
pub fn fitted_trapezoid_weights(h: f64, c: f64) -> [f64; 2] {
    let [m0, m1, _] = exp_moments(h, c);
    [m0 - m1 / h, m1 / h]
}

/// `[∫_0^T e^{-cs} ds, ∫_0^T s e^{-cs} ds, ∫_0^T s² e^{-cs} ds]`.
fn exp_moments(span: f64, c: f64) -> [f64; 3] {
    let x = c * span;
    if x.abs() < 0.5 {
        // series in x: ∫_0^T s^k e^{-cs} ds = T^{k+1} Σ_j (-x)^j / (j! (j+k+1))
        let mut out = [0.0; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for j in 0..40 {
                let contrib = term / (j + k + 1) as f64;
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs() {
                    break;
                }
                term *= -x / (j + 1) as f64;
            }
            *slot = span.powi(k as i32 + 1) * sum;
        }
        out
    } else {
        let e = (-x).exp();
        let m0 = (1.0 - e) / c;
        let m1 = (m0 - span * e) / c;
        let m2 = (2.0 * m1 - span * span * e) / c;
        [m0, m1, m2]
    }
}
