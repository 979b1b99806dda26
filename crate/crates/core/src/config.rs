//! TOML run configuration. Every section is optional and falls back to the
//! reference model; unknown keys are rejected.

use crate::eigen::EigenOptions;
use crate::error::{GrowFragError, Result};
use crate::extinction::ExtinctionOptions;
use crate::grid::{GridScheme, MassGrid};
use crate::interp::MonotoneCubic;
use crate::model::{DivisionRate, FragmentKernel, GrowthLaw, ModelSpec};
use crate::simulate::SimulationOptions;
use crate::validate::{BatteryOptions, CrossCheckOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The configuration file with every default spelled out.
pub const DEFAULT_CONFIG: &str = r#"seed = 0

[growth]
kind = "gompertz"        # gompertz | power-logistic | tabulated
a = 1.0
# theta = 1.0            # power-logistic only
# x = [...]              # tabulated only, with values = [...]

[kernel]
kind = "symmetric-beta"  # symmetric-beta | uniform | tabulated
beta = 2.0

[division]
kind = "ramp"            # ramp | tabulated
bbar = 3.0
mdiv = 0.25

[death]
D = 0.0

[mass]
M = 1.0

[grid]
n = 200
scheme = "uniform-trapezoid"  # uniform-trapezoid | gauss-legendre-composite

[simulate]
x0 = 0.5
horizon = 30.0
replicas = 2000
max_pop = 500
max_events = 10000000
survival_proxy = true
sample_times = []
weight = "one"           # one | mass | phi (reads phi_file)
record_events = false

[extinction]
tol = 1e-8
max_iter = 10000
start = 0.0

[eigen]
epsilon_schedule = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
lambda_tol = 1e-5
mu_tol = 1e-11
power_tol = 1e-13
power_max_iter = 100000
bisection_max_iter = 100
phi_tol = 1e-3

[pde]
horizon = 40.0
cfl = 0.9
cadence = 100

[crosscheck]
x0 = 0.5
pde_horizon = 40.0
replicas = 2000
horizon = 30.0
max_pop = 500
dead_zone = 0.1
martingale_times = [0.0, 1.0, 2.0, 4.0]
martingale_replicas = 4000
growth_times = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
growth_replicas = 4000
lambda_shift = 0.0       # nonzero values make a negative control
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSection {
    pub kind: String,
    pub a: Option<f64>,
    pub theta: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

impl Default for GrowthSection {
    fn default() -> Self {
        Self { kind: "gompertz".into(), a: Some(1.0), theta: None, x: None, values: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub kind: String,
    pub beta: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { kind: "symmetric-beta".into(), beta: Some(2.0), x: None, values: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivisionSection {
    pub kind: String,
    pub bbar: Option<f64>,
    pub mdiv: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

impl Default for DivisionSection {
    fn default() -> Self {
        Self { kind: "ramp".into(), bbar: Some(3.0), mdiv: Some(0.25), x: None, values: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeathSection {
    #[serde(rename = "D")]
    pub d: f64,
}

impl Default for DeathSection {
    fn default() -> Self {
        Self { d: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassSection {
    #[serde(rename = "M")]
    pub m: f64,
}

impl Default for MassSection {
    fn default() -> Self {
        Self { m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub scheme: GridScheme,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 200, scheme: GridScheme::Uniform }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightName {
    One,
    Mass,
    Phi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub x0: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub max_pop: usize,
    pub max_events: usize,
    pub survival_proxy: bool,
    pub sample_times: Vec<f64>,
    pub weight: WeightName,
    /// CSV with columns `x,phi` (as written by the `eigen` subcommand).
    pub phi_file: Option<String>,
    pub record_events: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let s = SimulationOptions::default();
        Self {
            x0: 0.5,
            horizon: s.horizon,
            replicas: 2000,
            max_pop: s.max_pop,
            max_events: s.max_events,
            survival_proxy: s.survival_proxy,
            sample_times: Vec::new(),
            weight: WeightName::One,
            phi_file: None,
            record_events: false,
        }
    }
}

impl SimulateSection {
    pub fn options(&self) -> SimulationOptions {
        SimulationOptions {
            horizon: self.horizon,
            max_pop: self.max_pop,
            max_events: self.max_events,
            survival_proxy: self.survival_proxy,
            sample_times: self.sample_times.clone(),
            record_events: self.record_events,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtinctionSection {
    pub tol: f64,
    pub max_iter: usize,
    pub start: f64,
}

impl Default for ExtinctionSection {
    fn default() -> Self {
        let o = ExtinctionOptions::default();
        Self { tol: o.tol, max_iter: o.max_iter, start: o.start }
    }
}

impl ExtinctionSection {
    pub fn options(&self) -> ExtinctionOptions {
        ExtinctionOptions { tol: self.tol, max_iter: self.max_iter, start: self.start, keep_generations: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSection {
    pub horizon: f64,
    pub dt: Option<f64>,
    pub cfl: f64,
    pub cadence: usize,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self { horizon: 40.0, dt: None, cfl: crate::pde::DEFAULT_CFL, cadence: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossCheckSection {
    pub x0: f64,
    pub pde_horizon: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub max_pop: usize,
    pub dead_zone: f64,
    pub martingale_times: Vec<f64>,
    pub martingale_replicas: usize,
    pub growth_times: Vec<f64>,
    pub growth_replicas: usize,
    pub lambda_shift: f64,
}

impl Default for CrossCheckSection {
    fn default() -> Self {
        let c = CrossCheckOptions::default();
        let b = BatteryOptions::default();
        Self {
            x0: c.x0,
            pde_horizon: c.pde_horizon,
            replicas: c.replicas,
            horizon: c.horizon,
            max_pop: c.max_pop,
            dead_zone: c.dead_zone,
            martingale_times: b.martingale_times,
            martingale_replicas: b.martingale_replicas,
            growth_times: b.growth_times,
            growth_replicas: b.growth_replicas,
            lambda_shift: b.lambda_shift,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub growth: GrowthSection,
    pub kernel: KernelSection,
    pub division: DivisionSection,
    pub death: DeathSection,
    pub mass: MassSection,
    pub grid: GridSection,
    pub simulate: SimulateSection,
    pub extinction: ExtinctionSection,
    pub eigen: EigenOptions,
    pub pde: PdeSection,
    pub crosscheck: CrossCheckSection,
}

fn require(section: &str, key: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| GrowFragError::Config(format!("{section}.{key} is required")))
}

fn table(section: &str, x: &Option<Vec<f64>>, values: &Option<Vec<f64>>) -> Result<MonotoneCubic> {
    match (x, values) {
        (Some(x), Some(v)) => {
            MonotoneCubic::new(x.clone(), v.clone()).map_err(|e| GrowFragError::Config(format!("{section} table: {e}")))
        }
        _ => Err(GrowFragError::Config(format!("{section}.x and {section}.values are required"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GrowFragError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GrowFragError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| GrowFragError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let g = &self.growth;
        let growth = match g.kind.as_str() {
            "gompertz" => GrowthLaw::Gompertz { a: require("growth", "a", g.a)? },
            "power-logistic" => GrowthLaw::PowerLogistic {
                a: require("growth", "a", g.a)?,
                theta: require("growth", "theta", g.theta)?,
            },
            "tabulated" => GrowthLaw::Tabulated(table("growth", &g.x, &g.values)?),
            other => return Err(GrowFragError::Config(format!("unknown growth.kind {other:?}"))),
        };
        let k = &self.kernel;
        let kernel = match k.kind.as_str() {
            "symmetric-beta" => FragmentKernel::SymmetricBeta { beta: require("kernel", "beta", k.beta)? },
            "uniform" => FragmentKernel::SymmetricBeta { beta: 1.0 },
            "tabulated" => FragmentKernel::Tabulated(table("kernel", &k.x, &k.values)?),
            other => return Err(GrowFragError::Config(format!("unknown kernel.kind {other:?}"))),
        };
        let d = &self.division;
        let division = match d.kind.as_str() {
            "ramp" => DivisionRate::RampAboveThreshold {
                bbar: require("division", "bbar", d.bbar)?,
                mdiv: require("division", "mdiv", d.mdiv)?,
            },
            "tabulated" => DivisionRate::Tabulated(table("division", &d.x, &d.values)?),
            other => return Err(GrowFragError::Config(format!("unknown division.kind {other:?}"))),
        };
        ModelSpec::new(growth, division, kernel, self.death.d, self.mass.m)
            .map_err(|e| GrowFragError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<MassGrid> {
        MassGrid::new(self.mass.m, self.grid.n, self.grid.scheme).map_err(|e| GrowFragError::Config(e.to_string()))
    }

    pub fn crosscheck_options(&self) -> (CrossCheckOptions, BatteryOptions) {
        let c = &self.crosscheck;
        let opts = CrossCheckOptions {
            grid_n: self.grid.n,
            x0: c.x0,
            pde_horizon: c.pde_horizon,
            replicas: c.replicas,
            horizon: c.horizon,
            max_pop: c.max_pop,
            seed: self.seed,
            dead_zone: c.dead_zone,
            eigen: self.eigen.clone(),
            extinction: self.extinction.options(),
            ..CrossCheckOptions::default()
        };
        let battery = BatteryOptions {
            martingale_times: c.martingale_times.clone(),
            martingale_replicas: c.martingale_replicas,
            growth_times: c.growth_times.clone(),
            growth_replicas: c.growth_replicas,
            lambda_shift: c.lambda_shift,
        };
        (opts, battery)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults_match() {
        let parsed = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
        assert_eq!(parsed, RunConfig::default());
        assert_eq!(parsed.model().unwrap(), ModelSpec::reference(0.0));
    }

    #[test]
    fn empty_file_is_reference_model() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.model().unwrap(), ModelSpec::reference(0.0));
        assert_eq!(cfg.grid().unwrap().len(), 200);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[growth]\nkind = \"gompertz\"\nb = 2.0\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\nx = 1\n").is_err());
        assert!(RunConfig::from_toml("speed = 1\n").is_err());
        assert!(RunConfig::from_toml("[eigen]\nlambda_tolerance = 1e-3\n").is_err());
        assert!(RunConfig::from_toml("[death]\nd = 0.1\n").is_err());
    }

    #[test]
    fn canonical_keys() {
        let cfg = RunConfig::from_toml(
            "[growth]\nkind = \"power-logistic\"\na = 2.0\ntheta = 0.5\n[kernel]\nbeta = 3.0\n\
             [division]\nbbar = 4.0\nmdiv = 0.1\n[death]\nD = 0.3\n[mass]\nM = 2.0\n\
             [grid]\nn = 40\nscheme = \"gauss-legendre-composite\"\n",
        )
        .unwrap();
        let spec = cfg.model().unwrap();
        assert_eq!(spec.growth, GrowthLaw::PowerLogistic { a: 2.0, theta: 0.5 });
        assert_eq!(spec.kernel, FragmentKernel::SymmetricBeta { beta: 3.0 });
        assert_eq!(spec.division, DivisionRate::RampAboveThreshold { bbar: 4.0, mdiv: 0.1 });
        assert_eq!(spec.death_rate, 0.3);
        assert_eq!(spec.max_mass, 2.0);
        assert_eq!(cfg.grid().unwrap().scheme(), GridScheme::GaussLegendreComposite);
    }

    #[test]
    fn missing_parameters_are_config_errors() {
        let cfg = RunConfig::from_toml("[growth]\nkind = \"power-logistic\"\na = 1.0\n").unwrap();
        assert!(matches!(cfg.model(), Err(GrowFragError::Config(_))));
    }
}
