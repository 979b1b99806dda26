//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).
//!
//! Used for tabulated model descriptors and for off-grid evaluation of
//! profiles; monotone data never overshoots, so non-negative samples give a
//! non-negative interpolant.

use crate::error::{GrowFragError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(GrowFragError::InvalidArgument(format!(
                "interpolation abscissae ({}) and values ({}) differ in length",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(GrowFragError::InvalidArgument("interpolation needs at least two samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GrowFragError::InvalidArgument("interpolation abscissae must be strictly increasing".into()));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(GrowFragError::InvalidArgument("interpolation samples must be finite".into()));
        }
        let slopes = fritsch_carlson_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Evaluates inside the sample range; `None` outside it.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return None;
        }
        Some(self.eval_unchecked(x))
    }

    /// Evaluates with flat extrapolation outside the sample range.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            self.ys[0]
        } else if x >= self.xs[n - 1] {
            self.ys[n - 1]
        } else {
            self.eval_unchecked(x)
        }
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let n = self.xs.len();
        // index of the interval [xs[k], xs[k+1]] containing x
        let k = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            // weighted harmonic mean
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_samples_and_lines() {
        let xs = vec![0.0, 0.5, 1.0, 2.0];
        let ys = vec![1.0, 2.0, 3.0, 5.0];
        let c = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((c.eval(*x).unwrap() - y).abs() < 1e-14);
        }
        assert!((c.eval(0.25).unwrap() - 1.5).abs() < 1e-12);
        assert!(c.eval(2.5).is_none());
        assert_eq!(c.eval_clamped(7.0), 5.0);
    }

    #[test]
    fn no_overshoot_on_step_data() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        for k in 0..=300 {
            let v = c.eval(k as f64 / 100.0).unwrap();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn rejects_unsorted_input() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
