//! Model instances: growth law, division rate, fragmentation kernel, death
//! rate and maximal mass, together with the deterministic growth flow.

mod audit;
mod division;
mod growth;
mod kernel;

pub use audit::{audit_hypotheses, Check, HypothesisReport};
pub use division::DivisionRate;
pub use growth::GrowthLaw;
pub use kernel::FragmentKernel;

use crate::error::{GrowFragError, Result};
use crate::ode;
use serde::{Deserialize, Serialize};

/// Time to reach a mass, or `Never` when the target is at or above `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum HittingTime {
    Finite(f64),
    Never,
}

impl HittingTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            HittingTime::Finite(t) => Some(t),
            HittingTime::Never => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub growth: GrowthLaw,
    pub division: DivisionRate,
    pub kernel: FragmentKernel,
    pub death_rate: f64,
    pub max_mass: f64,
}

impl ModelSpec {
    pub fn new(
        growth: GrowthLaw,
        division: DivisionRate,
        kernel: FragmentKernel,
        death_rate: f64,
        max_mass: f64,
    ) -> Result<Self> {
        if !(max_mass > 0.0) || !max_mass.is_finite() {
            return Err(GrowFragError::InvalidModel(format!("mass.M must be positive, got {max_mass}")));
        }
        if !(death_rate >= 0.0) || !death_rate.is_finite() {
            return Err(GrowFragError::InvalidModel(format!("death.D must be non-negative, got {death_rate}")));
        }
        growth.validate(max_mass)?;
        division.validate(max_mass)?;
        kernel.validate()?;
        Ok(Self { growth, division, kernel, death_rate, max_mass })
    }

    /// Gompertz a = 1, M = 1, Beta(2,2) kernel, ramp b̄ = 3 above m_div = 0.25.
    pub fn reference(death_rate: f64) -> Self {
        Self::new(
            GrowthLaw::Gompertz { a: 1.0 },
            DivisionRate::RampAboveThreshold { bbar: 3.0, mdiv: 0.25 },
            FragmentKernel::SymmetricBeta { beta: 2.0 },
            death_rate,
            1.0,
        )
        .expect("reference model is valid")
    }

    pub fn with_death_rate(&self, death_rate: f64) -> Result<Self> {
        Self::new(self.growth.clone(), self.division.clone(), self.kernel.clone(), death_rate, self.max_mass)
    }

    fn check_mass(&self, x: f64) -> Result<()> {
        if x >= 0.0 && x <= self.max_mass {
            Ok(())
        } else {
            Err(GrowFragError::Domain { what: "mass", value: x, lo: 0.0, hi: self.max_mass })
        }
    }

    /// `g(x)` without domain checks; zero outside (0, M) for the analytic laws.
    pub fn growth_rate(&self, x: f64) -> f64 {
        self.growth.eval(x, self.max_mass)
    }

    /// `b(x)` without domain checks.
    pub fn division_rate(&self, x: f64) -> f64 {
        self.division.eval(x, self.max_mass)
    }

    pub fn max_division_rate(&self) -> f64 {
        self.division.max_rate()
    }

    pub fn division_threshold(&self) -> f64 {
        self.division.threshold()
    }

    /// Returns `(g(x), b(x))`.
    pub fn eval_rates(&self, x: f64) -> Result<(f64, f64)> {
        self.check_mass(x)?;
        Ok((self.growth_rate(x), self.division_rate(x)))
    }

    pub fn kernel_density(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(GrowFragError::Domain { what: "proportion", value: alpha, lo: 0.0, hi: 1.0 });
        }
        Ok(self.kernel.density(alpha))
    }

    /// `b(y)/y · q(x/y)`, the fragmentation kernel in mass variables.
    pub fn fragmentation_kernel(&self, x: f64, y: f64) -> f64 {
        if y <= 0.0 || x > y {
            return 0.0;
        }
        let b = self.division_rate(y);
        if b == 0.0 {
            return 0.0;
        }
        b / y * self.kernel.density(x / y)
    }

    /// Growth flow `A_t(x)`.
    pub fn flow(&self, x: f64, t: f64) -> Result<f64> {
        self.check_mass(x)?;
        if !(t >= 0.0) {
            return Err(GrowFragError::Domain { what: "time", value: t, lo: 0.0, hi: f64::INFINITY });
        }
        let m = self.max_mass;
        if x == 0.0 || x == m || t == 0.0 {
            return Ok(x);
        }
        match &self.growth {
            GrowthLaw::Gompertz { a } => Ok((m * ((x / m).ln() * (-a * t).exp()).exp()).min(m)),
            GrowthLaw::PowerLogistic { a, theta } => {
                let top = m.powf(-theta);
                let w = (x.powf(-theta) - top) * (-theta * a * t).exp();
                Ok((top + w).powf(-1.0 / theta).min(m))
            }
            GrowthLaw::Tabulated(_) => self.flow_ode(x, t),
        }
    }

    /// Growth flow by numerical integration, regardless of the growth law.
    pub fn flow_ode(&self, x: f64, t: f64) -> Result<f64> {
        self.check_mass(x)?;
        let m = self.max_mass;
        let y = ode::integrate(
            |y: &[f64; 1]| [self.growth_rate(y[0])],
            |y: &mut [f64; 1]| y[0] = y[0].clamp(0.0, m),
            [x],
            t,
            ode::DEFAULT_TOL,
        )
        .map_err(|e| GrowFragError::numerical(format!("flow from x = {x} over t = {t}"), e.to_string()))?;
        Ok(y[0])
    }

    /// First time the flow started at `x` reaches `y`.
    pub fn hitting_time(&self, x: f64, y: f64) -> Result<HittingTime> {
        if !(x > 0.0 && x <= self.max_mass) {
            return Err(GrowFragError::Domain { what: "start mass", value: x, lo: 0.0, hi: self.max_mass });
        }
        if y < x {
            return Err(GrowFragError::Domain { what: "target mass", value: y, lo: x, hi: self.max_mass });
        }
        if y >= self.max_mass {
            return Ok(HittingTime::Never);
        }
        if y == x {
            return Ok(HittingTime::Finite(0.0));
        }
        let m = self.max_mass;
        match &self.growth {
            GrowthLaw::Gompertz { a } => Ok(HittingTime::Finite(((m / x).ln() / (m / y).ln()).ln() / a)),
            GrowthLaw::PowerLogistic { a, theta } => {
                let top = m.powf(-theta);
                let ratio = (x.powf(-theta) - top) / (y.powf(-theta) - top);
                Ok(HittingTime::Finite(ratio.ln() / (theta * a)))
            }
            GrowthLaw::Tabulated(_) => self.hitting_time_bisection(x, y).map(HittingTime::Finite),
        }
    }

    /// Bisection on `t ↦ A_t(x) - y`, bracket doubled from t = 1.
    pub fn hitting_time_bisection(&self, x: f64, y: f64) -> Result<f64> {
        let mut hi = 1.0;
        let mut lo = 0.0;
        while self.flow(x, hi)? < y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e9 {
                return Err(GrowFragError::numerical(
                    "hitting time",
                    format!("flow from {x} does not reach {y} before t = 1e9"),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.flow(x, mid)? < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `∫_0^t b(A_s(x)) ds`, integrated jointly with the flow.
    pub fn cumulative_hazard(&self, x: f64, t: f64) -> Result<f64> {
        self.check_mass(x)?;
        if !(t >= 0.0) {
            return Err(GrowFragError::Domain { what: "time", value: t, lo: 0.0, hi: f64::INFINITY });
        }
        let m = self.max_mass;
        let threshold = self.division_threshold();
        // below the threshold the hazard only starts once the flow crosses it
        let (start, remaining) = if x <= threshold && x > 0.0 {
            match self.hitting_time(x, threshold)? {
                HittingTime::Finite(t0) if t0 < t => (threshold, t - t0),
                _ => return Ok(0.0),
            }
        } else {
            (x, t)
        };
        let y = ode::integrate(
            |y: &[f64; 2]| [self.growth_rate(y[0]), self.division_rate(y[0])],
            |y: &mut [f64; 2]| y[0] = y[0].clamp(0.0, m),
            [start, 0.0],
            remaining,
            ode::DEFAULT_TOL,
        )
        .map_err(|e| GrowFragError::numerical(format!("hazard from x = {x} over t = {t}"), e.to_string()))?;
        Ok(y[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn e() -> f64 {
        std::f64::consts::E
    }

    #[test]
    fn rates_at_reference_points() {
        let spec = ModelSpec::reference(0.0);
        assert_eq!(spec.eval_rates(0.0).unwrap().0, 0.0);
        assert_eq!(spec.eval_rates(1.0).unwrap().0, 0.0);
        let (g, _) = spec.eval_rates(1.0 / e()).unwrap();
        assert!((g - 1.0 / e()).abs() < 1e-15);
        assert_eq!(spec.eval_rates(0.2).unwrap().1, 0.0);
        assert!(matches!(spec.eval_rates(1.5), Err(GrowFragError::Domain { .. })));
        assert!(matches!(spec.eval_rates(-0.1), Err(GrowFragError::Domain { .. })));
    }

    #[test]
    fn kernel_values() {
        let spec = ModelSpec::reference(0.0);
        assert!((spec.kernel_density(0.5).unwrap() - 1.5).abs() < 1e-13);
        assert_eq!(spec.kernel_density(0.0).unwrap(), 0.0);
        assert!((spec.kernel_density(0.3).unwrap() - spec.kernel_density(0.7).unwrap()).abs() < 1e-14);
        assert!(spec.kernel_density(1.2).is_err());
    }

    #[test]
    fn gompertz_flow_and_hitting_time() {
        let spec = ModelSpec::reference(0.0);
        assert_eq!(spec.flow(0.0, 10.0).unwrap(), 0.0);
        let a = spec.flow(1.0 / e(), 2f64.ln()).unwrap();
        assert!((a - (-0.5f64).exp()).abs() < 1e-12);
        let t = spec.hitting_time(1.0 / e(), (-0.5f64).exp()).unwrap().finite().unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-12);
        assert_eq!(spec.hitting_time(0.3, 0.3).unwrap(), HittingTime::Finite(0.0));
        assert_eq!(spec.hitting_time(0.3, 1.0).unwrap(), HittingTime::Never);
        assert!(spec.hitting_time(0.5, 0.4).is_err());
        let mut prev = 0.5;
        for k in 1..200 {
            let v = spec.flow(0.5, k as f64 * 0.25).unwrap();
            assert!(v >= prev && v <= 1.0);
            prev = v;
        }
    }

    #[test]
    fn ode_flow_matches_power_logistic_closed_form() {
        let spec = ModelSpec::new(
            GrowthLaw::PowerLogistic { a: 0.7, theta: 0.5 },
            DivisionRate::RampAboveThreshold { bbar: 2.0, mdiv: 0.3 },
            FragmentKernel::SymmetricBeta { beta: 3.0 },
            0.1,
            2.0,
        )
        .unwrap();
        for &(x, t) in &[(0.1, 0.5), (0.9, 3.0), (1.9, 1.0)] {
            let exact = spec.flow(x, t).unwrap();
            let num = spec.flow_ode(x, t).unwrap();
            assert!((exact - num).abs() < 1e-9, "{exact} vs {num}");
        }
        let t = spec.hitting_time(0.2, 1.3).unwrap().finite().unwrap();
        assert!((spec.flow(0.2, t).unwrap() - 1.3).abs() < 1e-12);
        assert!((spec.hitting_time_bisection(0.2, 1.3).unwrap() - t).abs() < 1e-9);
    }

    #[test]
    fn hazard_zero_below_threshold_and_at_zero_time() {
        let spec = ModelSpec::reference(0.0);
        let t_cross = spec.hitting_time(0.1, 0.25).unwrap().finite().unwrap();
        assert_eq!(spec.cumulative_hazard(0.1, 0.9 * t_cross).unwrap(), 0.0);
        assert_eq!(spec.cumulative_hazard(0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn hazard_matches_refined_quadrature() {
        // oracle: Richardson-refined composite Gauss-Legendre in time on the closed-form flow,
        // split at the threshold crossing
        let spec = ModelSpec::reference(0.0);
        let gl = GaussLegendre::new(8);
        let oracle = |panels: usize| {
            gl.integrate_composite(0.0, 1.0, panels, |s| {
                let a = 1.0 * ((0.5f64).ln() * (-s).exp()).exp();
                3.0 * ((a - 0.25) / 0.75).min(1.0)
            })
        };
        let coarse = oracle(200);
        let fine = oracle(400);
        let refined = fine + (fine - coarse) / 255.0;
        let h = spec.cumulative_hazard(0.5, 1.0).unwrap();
        assert!((h - refined).abs() < 1e-8, "{h} vs {refined}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ModelSpec::new(
            GrowthLaw::Gompertz { a: -1.0 },
            DivisionRate::RampAboveThreshold { bbar: 3.0, mdiv: 0.25 },
            FragmentKernel::SymmetricBeta { beta: 2.0 },
            0.0,
            1.0
        )
        .is_err());
        assert!(ModelSpec::reference(0.0).with_death_rate(-1.0).is_err());
    }
}
