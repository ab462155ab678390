#![allow(dead_code)]

use std::sync::Arc;

use evi_plast::adjoint::{ControlMetric, ControlSpace, TrackingTarget};
use evi_plast::evolution::{ControlTrajectory, Regularization, TimeGrid};
use evi_plast::flow_rule::FlowRuleParams;
use evi_plast::mesh::{build_mesh, DiscreteOperators, FeSpace, Side};
use evi_plast::optimize::ReducedProblem;
use evi_plast::presets;
use evi_plast::resolvent::{NewtonSettings, TripleField};
use evi_plast::tensor::MaterialModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const YIELD: f64 = 0.05;

pub fn ops_with(res: usize, yield_stress: f64) -> Arc<DiscreteOperators<f64>> {
    let mesh = build_mesh(2, &[1.0, 1.0], &[res, res], &[Side::Left]).unwrap();
    let mat = MaterialModel::isotropic(2, 1.0, 1.0, 0.5, 1.0, yield_stress).unwrap();
    Arc::new(DiscreteOperators::assemble(FeSpace::new(mesh).unwrap(), mat, false).unwrap())
}

pub fn ops(res: usize) -> Arc<DiscreteOperators<f64>> {
    ops_with(res, YIELD)
}

pub fn pulse(grid: TimeGrid<f64>, ops: &DiscreteOperators<f64>, amp: f64) -> ControlTrajectory<f64> {
    presets::sine_pulse_load(grid, ops, amp, &[0.0, -1.0]).unwrap()
}

pub fn problem(res: usize, steps: usize, lambda: f64, s: f64, alpha: f64, space: ControlSpace) -> ReducedProblem<f64> {
    let ops = ops(res);
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let params = FlowRuleParams::new(YIELD, lambda, s).unwrap();
    let target: TrackingTarget<f64> = presets::static_shape_target(&grid, &ops, 0.2);
    let metric = Arc::new(ControlMetric::new(space, grid, &ops).unwrap());
    ReducedProblem::new(
        ops.clone(),
        grid,
        TripleField::zeros(&ops),
        params,
        Regularization::Smooth,
        target,
        alpha,
        metric,
        NewtonSettings::default(),
    )
    .unwrap()
}

/// Random load in the control space (zero at pinned time nodes).
pub fn random_control(problem: &ReducedProblem<f64>, rng: &mut ChaCha8Rng, amp: f64) -> ControlTrajectory<f64> {
    let n = problem.ops.n_u();
    let g = ControlTrajectory::from_fn(problem.grid, |_, _| (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect());
    problem.metric.project(&g)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state(ops: &DiscreteOperators<f64>, rng: &mut ChaCha8Rng, amp: f64) -> TripleField<f64> {
    let mut v = |n: usize| (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect::<Vec<_>>();
    TripleField::new(v(ops.n_u()), v(ops.n_u()), v(ops.n_q()))
}
