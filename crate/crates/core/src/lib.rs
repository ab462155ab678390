//! Dynamic elastoplasticity with linear kinematic hardening, written as an
//! evolution inclusion `Q⁻¹ ẋ + 𝒜 x ∋ R f` in the state `x = (u, v, q)`
//! (displacement, velocity, stress-like internal variable), together with
//! its Yosida/smoothed regularization and adjoint-based optimal control of
//! the body force.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix `f64`.
//!
//! Layers, bottom up:
//! - [`tensor`]: symmetric tensors in Mandel storage and the material model;
//! - [`flow_rule`]: projection onto the admissible set, Yosida flow, smoothed resolvent;
//! - [`mesh`]: structured P1 meshes and assembled operators;
//! - [`resolvent`]: the inner elliptic solve behind the resolvent and its derivatives;
//! - [`evolution`]: implicit time stepping, sensitivities and diagnostics;
//! - [`adjoint`]: tracking objective, adjoint recursion and control metric;
//! - [`optimize`]: reduced problem, L-BFGS and continuation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod error;
pub mod evolution;
pub mod flow_rule;
pub mod linalg;
pub mod mesh;
pub mod optimize;
pub mod presets;
pub mod resolvent;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use flow_rule::Mode;
pub use scalar::Real;

pub type SymTensor = tensor::SymTensor2<f64>;
pub type Rank4 = tensor::Rank4Tensor<f64>;
pub type Material = tensor::MaterialModel<f64>;
pub type FlowParams = flow_rule::FlowRuleParams<f64>;
pub type Operators = mesh::DiscreteOperators<f64>;
pub type State = resolvent::TripleField<f64>;
pub type Control = evolution::ControlTrajectory<f64>;
pub type Trajectory = evolution::StateTrajectory<f64>;
pub type Target = adjoint::TrackingTarget<f64>;
pub type Metric = adjoint::ControlMetric<f64>;
pub type Problem = optimize::ReducedProblem<f64>;
