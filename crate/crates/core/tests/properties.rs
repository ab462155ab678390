mod common;

use common::*;
use evi_plast::adjoint::ControlSpace;
use evi_plast::evolution::{solve_state, ControlTrajectory, Regularization, Scheme, TimeGrid};
use evi_plast::flow_rule::{FlowRuleParams, MapKind, PointwiseMap};
use evi_plast::presets;
use evi_plast::resolvent::{apply_regularized, apply_resolvent, NewtonSettings};
use evi_plast::tensor::SymTensor2;
use proptest::prelude::*;

fn settings() -> NewtonSettings<f64> {
    NewtonSettings { abs_tol: 1e-14, rel_tol: 1e-13, ..NewtonSettings::default() }
}

fn map_strategy() -> impl Strategy<Value = (MapKind, f64, f64)> {
    (prop_oneof![Just(MapKind::Smooth), Just(MapKind::Projection)], 0.02f64..0.5, 0.01f64..0.9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regularized_operator_is_monotone((kind, lambda, s) in map_strategy(), seed in any::<u64>()) {
        let o = ops(2);
        let map = PointwiseMap::new(kind, FlowRuleParams::new(YIELD, lambda, s).unwrap());
        let mut r = rng(seed);
        let x = random_state(&o, &mut r, 0.1);
        let y = random_state(&o, &mut r, 0.1);
        let ax = apply_regularized(&x, &map, &o, &settings()).unwrap();
        let ay = apply_regularized(&y, &map, &o, &settings()).unwrap();
        let d = x.sub(&y);
        let pairing = o.h_inner(&ax.sub(&ay), &d);
        prop_assert!(pairing >= -1e-10 * o.h_inner(&d, &d) / lambda, "pairing {pairing}");
    }

    #[test]
    fn resolvent_is_nonexpansive((kind, lambda, s) in map_strategy(), seed in any::<u64>()) {
        let o = ops(2);
        let map = PointwiseMap::new(kind, FlowRuleParams::new(YIELD, lambda, s).unwrap());
        let mut r = rng(seed);
        let x = random_state(&o, &mut r, 0.1);
        let y = random_state(&o, &mut r, 0.1);
        let rx = apply_resolvent(&x, &map, &o, &settings()).unwrap();
        let ry = apply_resolvent(&y, &map, &o, &settings()).unwrap();
        prop_assert!(o.h_norm(&rx.sub(&ry)) <= (1.0 + 1e-9) * o.h_norm(&x.sub(&y)));
    }

    #[test]
    fn plastic_seed_is_a_fixed_point(c in proptest::array::uniform3(-0.004f64..0.004), lambda in 0.02f64..0.5, s in 0.01f64..0.5) {
        let o = ops(3);
        let seed = SymTensor2::from_mandel(2, &c).unwrap();
        let x = presets::plastic_seed_state(&o, &seed).unwrap();
        let params = FlowRuleParams::new(YIELD, lambda, s).unwrap();
        prop_assume!(presets::check_admissible_stress(&x, &params, &o).is_ok());
        let map = PointwiseMap::new(MapKind::Smooth, params);
        let rx = apply_resolvent(&x, &map, &o, &settings()).unwrap();
        prop_assert!(o.h_norm(&rx.sub(&x)) <= 1e-10 * o.h_norm(&x).max(1e-12));
    }
}

#[test]
fn unloaded_equilibrium_stays_constant() {
    let o = ops(4);
    let seed = SymTensor2::from_mandel(2, &[0.004, -0.002, 0.003]).unwrap();
    let x0 = presets::plastic_seed_state(&o, &seed).unwrap();
    let params = FlowRuleParams::new(YIELD, 0.1, 0.05).unwrap();
    presets::check_admissible_stress(&x0, &params, &o).unwrap();
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let f = ControlTrajectory::zeros(grid, o.n_u());
    for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
        let traj = solve_state(&f, &x0, params, Regularization::Smooth, scheme, &o, &NewtonSettings::default()).unwrap();
        for x in &traj.states {
            assert!(o.h_norm(&x.sub(&x0)) <= 1e-12 * o.h_norm(&x0), "{scheme:?}");
        }
    }
}

/// A loaded static equilibrium of the inclusion is not stationary for the
/// regularized operator; the drift vanishes with `λ`.
#[test]
fn prestressed_drift_vanishes_with_lambda() {
    let o = ops(4);
    let force = [0.0, -0.02];
    let x0 = presets::prestressed_state(&o, &force).unwrap();
    let grid = TimeGrid::new(1.0, 6).unwrap();
    let constant = o.space.interpolate(|_| force.to_vec());
    let f = ControlTrajectory::from_fn(grid, |_, _| constant.clone());
    let drift = |lambda: f64| {
        let params = FlowRuleParams::new(YIELD, lambda, 0.05).unwrap();
        presets::check_admissible_stress(&x0, &params, &o).unwrap();
        let traj = solve_state(&f, &x0, params, Regularization::Smooth, Scheme::ImplicitEuler, &o, &NewtonSettings::default()).unwrap();
        traj.states.iter().map(|x| o.h_norm(&x.sub(&x0))).fold(0.0, f64::max) / o.h_norm(&x0)
    };
    let (coarse, fine) = (drift(0.1), drift(0.01));
    assert!(fine < 0.2 * coarse, "drift {coarse} at 0.1, {fine} at 0.01");
}

#[test]
fn plasticity_bounds_the_stress_deviator() {
    let p = problem(4, 16, 0.1, 0.05, 1e-3, ControlSpace::ZeroEnds);
    let f = pulse(p.grid, &p.ops, 0.5);
    let traj = p.state(&f).unwrap();
    let mut peak = 0.0f64;
    for k in 0..=p.grid.steps {
        let rp = traj.resolvent_at(k, &p.ops);
        peak = peak.max(presets::max_deviatoric_stress(&rp.value, &p.ops));
    }
    assert!(peak <= YIELD * (1.0 + 1e-12), "peak {peak}");
    assert!(peak > 0.99 * YIELD, "load should reach the yield surface, peak {peak}");
}
