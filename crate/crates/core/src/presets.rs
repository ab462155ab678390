//! Ready-made initial states, loads and tracking targets.

use crate::error::{Error, Result};
use crate::evolution::{q_from_z, ControlTrajectory, TimeGrid};
use crate::flow_rule::FlowRuleParams;
use crate::linalg::Cholesky;
use crate::mesh::DiscreteOperators;
use crate::resolvent::TripleField;
use crate::scalar::Real;
use crate::tensor::SymTensor2;
use crate::adjoint::TrackingTarget;

fn uniform_vector<S: Real>(ops: &DiscreteOperators<S>, value: &[S]) -> Result<Vec<S>> {
    if value.len() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: value.len() });
    }
    Ok(ops.space.interpolate(|_| value.to_vec()))
}

/// Elasticity stiffness `Bᵀ W C B`.
fn elastic_stiffness<S: Real>(ops: &DiscreteOperators<S>) -> Result<Cholesky<S>> {
    let c = ops.material.elasticity;
    Cholesky::factor(&ops.assemble_point_stiffness(|_| c))
}

/// State with `u = v = 0` and `z = 0`.
pub fn rest_state<S: Real>(ops: &DiscreteOperators<S>) -> TripleField<S> {
    TripleField::zeros(ops)
}

/// Elastic equilibrium under a uniform static body force, with no plastic strain.
pub fn prestressed_state<S: Real>(ops: &DiscreteOperators<S>, body_force: &[S]) -> Result<TripleField<S>> {
    let f = uniform_vector(ops, body_force)?;
    let u = elastic_stiffness(ops)?.solve(&ops.mass_apply(&f));
    let z = vec![S::zero(); ops.n_q()];
    let q = q_from_z(&u, &z, ops);
    Ok(TripleField::new(u, vec![S::zero(); ops.n_u()], q))
}

/// Uniform plastic strain `z₀` with the displacement that balances it, at rest.
pub fn plastic_seed_state<S: Real>(ops: &DiscreteOperators<S>, seed: &SymTensor2<S>) -> Result<TripleField<S>> {
    if seed.dim() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: seed.dim() });
    }
    let z = ops.quad_field(|_| *seed);
    let cz = ops.apply_tensor(&ops.material.elasticity, &z);
    let u = elastic_stiffness(ops)?.solve(&ops.sym_grad_t_w(&cz));
    let q = q_from_z(&u, &z, ops);
    Ok(TripleField::new(u, vec![S::zero(); ops.n_u()], q))
}

/// Largest `|qᴰ|` over the quadrature points of a state.
pub fn max_deviatoric_stress<S: Real>(x: &TripleField<S>, ops: &DiscreteOperators<S>) -> S {
    (0..ops.n_points()).fold(S::zero(), |m, p| m.max(ops.point(&x.q, p).deviator().norm()))
}

/// Checks that the stress of a state lies where the smoothed resolvent acts as
/// the identity, so that the state is an equilibrium of the regularized operator.
pub fn check_admissible_stress<S: Real>(x: &TripleField<S>, params: &FlowRuleParams<S>, ops: &DiscreteOperators<S>) -> Result<()> {
    let bound = params.yield_stress / (S::one() + params.smoothing);
    let m = max_deviatoric_stress(x, ops);
    if m > bound {
        return Err(Error::InvalidParameter(format!(
            "initial stress deviator {m} exceeds the admissible radius {bound}"
        )));
    }
    Ok(())
}

/// Spatially uniform load `a·sin(πt/T)·d`, exactly zero at both end times.
pub fn sine_pulse_load<S: Real>(grid: TimeGrid<S>, ops: &DiscreteOperators<S>, amplitude: S, direction: &[S]) -> Result<ControlTrajectory<S>> {
    let base = uniform_vector(ops, direction)?;
    let pi = S::lit(std::f64::consts::PI);
    Ok(ControlTrajectory::from_fn(grid, |k, t| {
        let s = if k == 0 || k == grid.steps { S::zero() } else { amplitude * (pi * t / grid.final_time).sin() };
        base.iter().map(|&b| s * b).collect()
    }))
}

/// Bending-type target displacement `−a·x²` in the last coordinate direction
/// (`a·x²` in 1D), ramped in linearly over time, with zero velocity and plastic strain.
pub fn static_shape_target<S: Real>(grid: &TimeGrid<S>, ops: &DiscreteOperators<S>, amplitude: S) -> TrackingTarget<S> {
    let dim = ops.dim();
    let shape = ops.space.interpolate(|x| {
        let mut v = vec![S::zero(); dim];
        if dim == 1 {
            v[0] = amplitude * x[0] * x[0];
        } else {
            v[dim - 1] = -amplitude * x[0] * x[0];
        }
        v
    });
    let states = (0..grid.n_nodes())
        .map(|k| {
            let ramp = S::lit(k as f64) / S::lit(grid.steps as f64);
            TripleField::new(shape.iter().map(|&s| ramp * s).collect(), vec![S::zero(); ops.n_u()], vec![S::zero(); ops.n_q()])
        })
        .collect();
    TrackingTarget { states }
}
