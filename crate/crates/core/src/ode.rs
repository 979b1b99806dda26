//! Adaptive Dormand–Prince 5(4) integrator for small autonomous systems.

use crate::error::{GrowFragError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_STEPS: usize = 1_000_000;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(y)` from 0 to `t_end`. After every accepted step the
/// state is passed through `project`, which lets callers clamp onto an
/// invariant domain.
pub fn integrate<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    project: impl Fn(&mut [f64; N]),
    y0: [f64; N],
    t_end: f64,
    tol: f64,
) -> Result<[f64; N]> {
    if t_end == 0.0 {
        return Ok(y0);
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(GrowFragError::numerical(
            "ode",
            format!("integration horizon must be finite and non-negative, got {t_end}"),
        ));
    }
    let mut y = y0;
    let mut t = 0.0;
    let mut h = (t_end * 0.1).min(0.1);
    let mut k1 = f(&y);
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(GrowFragError::numerical("ode", format!("step budget exhausted at t = {t} of {t_end}")));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let stage = |ks: &[(&[f64; N], f64)]| -> [f64; N] {
            let mut out = y;
            for (k, a) in ks {
                for i in 0..N {
                    out[i] += h * a * k[i];
                }
            }
            out
        };
        let k2 = f(&stage(&[(&k1, A21)]));
        let k3 = f(&stage(&[(&k1, A31), (&k2, A32)]));
        let k4 = f(&stage(&[(&k1, A41), (&k2, A42), (&k3, A43)]));
        let k5 = f(&stage(&[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
        let k6 = f(&stage(&[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]));
        let y_new = stage(&[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let k7 = f(&y_new);
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol + tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            return Err(GrowFragError::numerical("ode", format!("non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            project(&mut y);
            k1 = f(&y);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t_end.max(1.0) && t < t_end {
            return Err(GrowFragError::numerical(
                "ode",
                format!("step size underflow at t = {t}, tolerance {tol:e} not met"),
            ));
        }
    }
    Ok(y)
}
