use growfrag::config::{RunConfig, DEFAULT_CONFIG};
use growfrag::eigen::{self, EigenOptions};
use growfrag::extinction::{solve_extinction, ExtinctionOptions};
use growfrag::model::audit_hypotheses;
use growfrag::pde::{self, PdeState};
use growfrag::simulate::{estimate_survival, SimulationOptions};
use growfrag::{MassGrid, ModelSpec};

#[test]
fn default_config_is_the_reference_model() {
    let cfg = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
    let spec = cfg.model().unwrap();
    let reference = ModelSpec::reference(cfg.death.d);
    for x in [0.1, 0.3, 0.7, 1.0] {
        assert_eq!(spec.growth_rate(x), reference.growth_rate(x));
        assert_eq!(spec.division_rate(x), reference.division_rate(x));
    }
    assert!(audit_hypotheses(&spec, &cfg.grid().unwrap()).violations().next().is_none());
}

#[test]
fn pde_relaxes_towards_the_stationary_profile() {
    let g = MassGrid::uniform(1.0, 200).unwrap();
    let spec = ModelSpec::reference(0.0);
    let sol = eigen::solve(&spec, &g, EigenOptions::default()).unwrap();
    let r0 = PdeState::default_initial(&g).unwrap();
    let distance = |t: f64| pde::profile_distance(&pde::growth_rate(&spec, &r0, t).unwrap().state, &sol.u).unwrap();
    let (d2, d10, d40) = (distance(2.0), distance(10.0), distance(40.0));
    assert!(d40 <= d10 && d10 < d2, "{d2} {d10} {d40}");
    assert!(d40 < 1e-2);

    let start = PdeState::new(g.clone(), sol.u.clone()).unwrap();
    let run = pde::growth_rate(&spec, &start, 10.0).unwrap();
    assert!(pde::profile_distance(&run.state, &sol.u).unwrap() < 1e-2);
    assert!((run.lambda_hat - sol.lambda).abs() < 5e-2);
}

#[test]
fn three_routes_agree_on_the_sign_of_fitness() {
    let g = MassGrid::uniform(1.0, 150).unwrap();
    let lambda0 = eigen::solve(&ModelSpec::reference(0.0), &g, EigenOptions::default()).unwrap().lambda0;
    let sim = SimulationOptions { horizon: 20.0, max_pop: 200, ..Default::default() };
    for (shift, invades) in [(-0.4, true), (0.4, false)] {
        let spec = ModelSpec::reference(lambda0 + shift);
        let p = solve_extinction(&spec, &g, ExtinctionOptions::default()).unwrap();
        let est = estimate_survival(&spec, 0.5, &sim, 400, 7).unwrap();
        assert_eq!(p.extinction_at(0.5) < 0.99, invades);
        assert_eq!(est.ci_excludes_zero(), invades);
    }
}
