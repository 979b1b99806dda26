use growfrag::extinction::PicardMap;
use growfrag::pde::{PdeSolver, PdeState, DEFAULT_CFL};
use growfrag::simulate::split_mass;
use growfrag::{DivisionRate, FragmentKernel, GrowthLaw, HittingTime, MassGrid, ModelSpec};
use proptest::prelude::*;
use std::sync::OnceLock;

fn gompertz(a: f64) -> ModelSpec {
    ModelSpec::new(
        GrowthLaw::Gompertz { a },
        DivisionRate::RampAboveThreshold { bbar: 3.0, mdiv: 0.25 },
        FragmentKernel::SymmetricBeta { beta: 2.0 },
        0.2,
        1.0,
    )
    .unwrap()
}

fn picard() -> &'static (MassGrid, PicardMap) {
    static MAP: OnceLock<(MassGrid, PicardMap)> = OnceLock::new();
    MAP.get_or_init(|| {
        let g = MassGrid::uniform(1.0, 60).unwrap();
        let map = PicardMap::new(&ModelSpec::reference(0.4), &g).unwrap();
        (g, map)
    })
}

proptest! {
    #[test]
    fn flow_is_a_semigroup(a in 0.2f64..3.0, x in 0.01f64..0.99, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let spec = gompertz(a);
        let two = spec.flow(spec.flow(x, s).unwrap(), t).unwrap();
        let one = spec.flow(x, s + t).unwrap();
        prop_assert!((two - one).abs() <= 1e-12);
    }

    #[test]
    fn hitting_time_inverts_flow(a in 0.2f64..3.0, x in 0.01f64..0.99, t in 0.0f64..4.0) {
        let spec = gompertz(a);
        let y = spec.flow(x, t).unwrap();
        prop_assume!(y < 1.0 - 1e-9);
        match spec.hitting_time(x, y).unwrap() {
            HittingTime::Finite(tau) => prop_assert!((tau - t).abs() <= 1e-8 * (1.0 + t)),
            HittingTime::Never => prop_assert!(false, "reachable mass reported unreachable"),
        }
    }

    #[test]
    fn flow_stays_below_maximum_mass(a in 0.2f64..3.0, x in 0.0f64..1.0, t in 0.0f64..50.0) {
        let y = gompertz(a).flow(x, t).unwrap();
        prop_assert!(y >= x && y <= 1.0);
    }

    #[test]
    fn hazard_is_nondecreasing_in_time(x in 0.01f64..0.99, s in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let spec = gompertz(1.0);
        let h0 = spec.cumulative_hazard(x, s).unwrap();
        let h1 = spec.cumulative_hazard(x, s + dt).unwrap();
        prop_assert!(h0 >= 0.0 && h1 >= h0);
    }

    #[test]
    fn split_conserves_mass(mass in 1e-6f64..10.0, alpha in 0.0f64..=1.0) {
        let (a, b) = split_mass(mass, alpha);
        prop_assert_eq!(a + b, mass);
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert_eq!(a >= b, alpha >= 0.5 || a == b);
    }

    #[test]
    fn picard_map_is_monotone(p in prop::collection::vec(0.0f64..1.0, 60), bump in prop::collection::vec(0.0f64..0.2, 60)) {
        let (_, map) = picard();
        let q: Vec<f64> = p.iter().zip(&bump).map(|(a, b)| (a + b).min(1.0)).collect();
        let gp = map.apply(&p).unwrap();
        let gq = map.apply(&q).unwrap();
        for (a, b) in gp.iter().zip(&gq) {
            prop_assert!(*a <= *b + 1e-14);
            prop_assert!((0.0..=1.0 + 1e-12).contains(a));
        }
    }

    #[test]
    fn pde_step_preserves_positivity(weights in prop::collection::vec(0.0f64..1.0, 80)) {
        let g = MassGrid::uniform(1.0, 80).unwrap();
        prop_assume!(weights.iter().sum::<f64>() > 1e-3);
        let solver = PdeSolver::new(&ModelSpec::reference(0.3), &g, DEFAULT_CFL).unwrap();
        let mut state = PdeState::new(g, weights).unwrap();
        for _ in 0..20 {
            solver.advance(&mut state, solver.max_dt()).unwrap();
        }
        prop_assert!(state.density.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn kernel_integrates_to_one_for_each_family() {
    let g = growfrag::quadrature::GaussLegendre::new(60);
    for kernel in [
        FragmentKernel::SymmetricBeta { beta: 3.0 },
        FragmentKernel::SymmetricBeta { beta: 4.0 },
        FragmentKernel::SymmetricBeta { beta: 1.0 },
    ] {
        let spec = ModelSpec::new(
            GrowthLaw::Gompertz { a: 1.0 },
            DivisionRate::RampAboveThreshold { bbar: 1.0, mdiv: 0.3 },
            kernel,
            0.0,
            1.0,
        )
        .unwrap();
        let mass = g.integrate(0.0, 1.0, |a| spec.kernel_density(a).unwrap());
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }
}
