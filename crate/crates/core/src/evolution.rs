//! Time integration of `Q⁻¹ ẋ + A(x) = R f`, with `Q⁻¹ = diag(I, ρI, (C+B)⁻¹)`
//! and `R f = (0, f, 0)`, plus forward sensitivities and diagnostics.
//!
//! Each implicit step is solved by Newton's method on the step residual. The
//! linearized step operator `K = Q⁻¹ + a(I − ℛ′(x))` is inverted by block
//! elimination down to one displacement-sized system (see [`StepSystem`]), so
//! forward steps, sensitivities and adjoint steps share one linear solver.

use crate::error::{Error, Result};
use crate::flow_rule::{FlowRuleParams, MapKind, Mode, PointwiseMap};
use crate::linalg::{axpy, dot, sub, Lu};
use crate::mesh::DiscreteOperators;
use crate::resolvent::{map_derivatives, resolvent_from_w, resolvent_point, NewtonSettings, ResolventPoint, TripleField};
use crate::scalar::Real;
use crate::tensor::{Rank4Tensor, SymTensor2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    pub final_time: S,
    pub steps: usize,
}

impl<S: Real> TimeGrid<S> {
    pub fn new(final_time: S, steps: usize) -> Result<Self> {
        if !(final_time > S::zero()) {
            return Err(Error::InvalidParameter(format!("final time must be positive, got {final_time}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("number of time steps must be positive".into()));
        }
        Ok(Self { final_time, steps })
    }

    pub fn dt(&self) -> S {
        self.final_time / S::lit(self.steps as f64)
    }

    pub fn time(&self, k: usize) -> S {
        self.dt() * S::lit(k as f64)
    }

    pub fn n_nodes(&self) -> usize {
        self.steps + 1
    }

    /// Trapezoidal quadrature weights on the time nodes.
    pub fn trapezoid_weights(&self) -> Vec<S> {
        let dt = self.dt();
        (0..=self.steps)
            .map(|k| if k == 0 || k == self.steps { dt / S::lit(2.0) } else { dt })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

/// Which pointwise map replaces the flow rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    /// Smoothed resolvent, `C¹` and suitable for gradients.
    #[default]
    Smooth,
    /// Plain Yosida regularization with the exact projection.
    Yosida,
}

pub fn pointwise_map<S: Real>(kind: Regularization, params: FlowRuleParams<S>) -> PointwiseMap<S> {
    match kind {
        Regularization::Smooth => PointwiseMap::new(MapKind::Smooth, params),
        Regularization::Yosida => PointwiseMap::new(MapKind::Projection, params),
    }
}

/// Time-discrete load: one free-dof nodal vector per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory<S> {
    pub grid: TimeGrid<S>,
    pub values: Vec<Vec<S>>,
}

impl<S: Real> ControlTrajectory<S> {
    pub fn zeros(grid: TimeGrid<S>, n_u: usize) -> Self {
        Self { grid, values: vec![vec![S::zero(); n_u]; grid.n_nodes()] }
    }

    pub fn from_fn(grid: TimeGrid<S>, mut f: impl FnMut(usize, S) -> Vec<S>) -> Self {
        Self { grid, values: (0..grid.n_nodes()).map(|k| f(k, grid.time(k))).collect() }
    }

    pub fn check_shape(&self, grid: &TimeGrid<S>, n_u: usize) -> Result<()> {
        if self.values.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: self.values.len() });
        }
        if let Some(bad) = self.values.iter().find(|v| v.len() != n_u) {
            return Err(Error::DimensionMismatch { expected: n_u, got: bad.len() });
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: S, other: &Self) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            axpy(a, y, x);
        }
    }

    pub fn scaled(&self, a: S) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.iter().map(|&x| a * x).collect()).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-S::one(), other);
        out
    }

    pub fn coeff_dot(&self, other: &Self) -> S {
        self.values.iter().zip(&other.values).fold(S::zero(), |s, (a, b)| s + dot(a, b))
    }
}

#[derive(Debug, Clone)]
pub struct StateTrajectory<S> {
    pub grid: TimeGrid<S>,
    pub states: Vec<TripleField<S>>,
    /// Inner displacement `T(x_k)` at every node.
    pub resolvent_u: Vec<Vec<S>>,
    pub params: FlowRuleParams<S>,
    pub regularization: Regularization,
    pub scheme: Scheme,
    pub newton_iterations: Vec<usize>,
}

impl<S: Real> StateTrajectory<S> {
    pub fn map(&self) -> PointwiseMap<S> {
        pointwise_map(self.regularization, self.params)
    }

    /// Resolvent value at node `k`, rebuilt from the stored inner displacement.
    pub fn resolvent_at(&self, k: usize, ops: &DiscreteOperators<S>) -> ResolventPoint<S> {
        resolvent_from_w(&self.states[k], self.resolvent_u[k].clone(), &self.map(), ops)
    }

    /// `A(x_k)`.
    pub fn operator_at(&self, k: usize, ops: &DiscreteOperators<S>) -> TripleField<S> {
        let r = self.resolvent_at(k, ops);
        self.states[k].sub(&r.value).scaled(S::one() / self.params.lambda)
    }
}

/// `q = C ∇ˢu − (C+B) z`.
pub fn q_from_z<S: Real>(u: &[S], z: &[S], ops: &DiscreteOperators<S>) -> Vec<S> {
    let mut q = ops.apply_tensor(&ops.material.elasticity, &ops.sym_grad(u));
    axpy(-S::one(), &ops.apply_tensor(&ops.material.combined, z), &mut q);
    q
}

/// `z = (C+B)⁻¹(C ∇ˢu − q)`.
pub fn z_from_q<S: Real>(u: &[S], q: &[S], ops: &DiscreteOperators<S>) -> Vec<S> {
    let mut t = ops.apply_tensor(&ops.material.elasticity, &ops.sym_grad(u));
    axpy(-S::one(), q, &mut t);
    ops.apply_tensor(&ops.material.combined_inv, &t)
}

/// Time integral `F(t_k) = ∫₀^{t_k} f` by the trapezoidal rule, divided by `ρ` if given.
pub fn integrate_load<S: Real>(f: &ControlTrajectory<S>, density: Option<S>) -> ControlTrajectory<S> {
    let dt = f.grid.dt();
    let scale = density.map_or(S::one(), |r| S::one() / r);
    let n = f.values.first().map_or(0, Vec::len);
    let mut acc = vec![S::zero(); n];
    let mut values = vec![acc.clone()];
    for k in 1..f.values.len() {
        for i in 0..n {
            acc[i] += dt / S::lit(2.0) * (f.values[k - 1][i] + f.values[k][i]) * scale;
        }
        values.push(acc.clone());
    }
    ControlTrajectory { grid: f.grid, values }
}

/// `Q⁻¹ x = (u, ρ v, (C+B)⁻¹ q)`.
pub fn apply_q_inv<S: Real>(x: &TripleField<S>, ops: &DiscreteOperators<S>) -> TripleField<S> {
    let rho = ops.material.density;
    TripleField {
        u: x.u.clone(),
        v: x.v.iter().map(|&a| rho * a).collect(),
        q: ops.apply_tensor(&ops.material.combined_inv, &x.q),
    }
}

/// `½⟨Q⁻¹x, x⟩_H = ½⟨D∇u,∇u⟩ + ½ρ‖v‖² + ½⟨(C+B)⁻¹q, q⟩`.
pub fn elastic_energy<S: Real>(x: &TripleField<S>, ops: &DiscreteOperators<S>) -> S {
    S::lit(0.5) * ops.h_inner(&apply_q_inv(x, ops), x)
}

fn load_field<S: Real>(f: &[S], ops: &DiscreteOperators<S>) -> TripleField<S> {
    TripleField { u: vec![S::zero(); ops.n_u()], v: f.to_vec(), q: vec![S::zero(); ops.n_q()] }
}

/// Linearized step operator `K = Q⁻¹ + a(I − ℛ′(x))` (or its adjoint) at a
/// fixed state, prepared for repeated solves.
///
/// With `P` the pointwise derivative of the map, `N = (C+B)⁻¹ + a(I − P)` and
/// `t = T′(x)e`, the rows of `K e = r` give
/// `e₁ = (r₁ + a t)/(1+a)`, `e₂ = (r₂ + (a/λ)(t − r₁)/(1+a))/(ρ + a)` and
/// `e₃ = N⁻¹[r₃ + a/(1+a) P Eᵀ B(t − r₁)]`. Substituting into the equation for
/// `t` leaves one displacement-sized system for `δ = t − r₁`. The adjoint
/// operator is handled by the same elimination with `Pᵀ`, conjugated by the
/// velocity reflection.
pub struct StepSystem<S> {
    mode: Mode,
    a: S,
    lambda: S,
    density: S,
    p: Vec<Rank4Tensor<S>>,
    n_inv: Vec<Rank4Tensor<S>>,
    schur: Lu<S>,
}

impl<S: Real> StepSystem<S> {
    pub fn new(
        map: &PointwiseMap<S>,
        map_arg: &[S],
        a: S,
        ops: &DiscreteOperators<S>,
        mode: Mode,
    ) -> Result<Self> {
        let lambda = map.lambda();
        let density = ops.material.density;
        let dim = ops.dim();
        let e = ops.material.coupling_e;
        let et = e.transpose();
        let id = Rank4Tensor::identity(dim);
        let p = map_derivatives(map, map_arg, ops, mode);
        let mut n_inv = Vec::with_capacity(p.len());
        for pp in &p {
            let n = ops.material.combined_inv.add(&id.sub(pp).scaled(a));
            n_inv.push(n.inverse()?);
        }
        let one_a = S::one() + a;
        let mut schur = ops.stiffness_d.clone();
        let g_hat = ops.assemble_point_stiffness(|k| {
            let ep = e.compose(&p[k]);
            ep.compose(&et)
                .scaled(S::one() / one_a)
                .add(&ep.compose(&n_inv[k]).compose(&p[k]).compose(&et).scaled(a / one_a))
        });
        schur.add_scaled(S::one(), &g_hat);
        let c_m = density / (one_a * (density + a) * lambda * lambda);
        schur.add_scaled(c_m, &ops.mass);
        Ok(Self { mode, a, lambda, density, p, n_inv, schur: Lu::factor(&schur)? })
    }

    /// Solves `K e = r` (or `K* e = r`).
    pub fn solve(&self, r: &TripleField<S>, ops: &DiscreteOperators<S>) -> TripleField<S> {
        match self.mode {
            Mode::Jvp => self.solve_structured(r, ops),
            Mode::Vjp => self.solve_structured(&r.velocity_flipped(), ops).velocity_flipped(),
        }
    }

    fn solve_structured(&self, r: &TripleField<S>, ops: &DiscreteOperators<S>) -> TripleField<S> {
        let (a, lam, rho) = (self.a, self.lambda, self.density);
        let one_a = S::one() + a;
        let e = ops.material.coupling_e;
        let ninv_r3 = ops.quad_field(|k| self.n_inv[k].apply(&ops.point(&r.q, k)));
        let epn = ops.quad_field(|k| e.apply(&self.p[k].apply(&ops.point(&ninv_r3, k))));
        let mut rhs = ops.stiffness_d.matvec(&r.u);
        for x in rhs.iter_mut() {
            *x = -*x;
        }
        axpy(S::one() / (lam * (rho + a)), &ops.mass_apply(&r.v), &mut rhs);
        axpy(-S::one(), &ops.sym_grad_t_w(&epn), &mut rhs);
        let delta = self.schur.solve(&rhs);

        let mut e1 = r.u.clone();
        axpy(a / one_a, &delta, &mut e1);
        let e2: Vec<S> = r.v.iter().zip(&delta).map(|(&rv, &d)| (rv + a / lam * d / one_a) / (rho + a)).collect();
        let ebd = ops.apply_tensor_transpose(&e, &ops.sym_grad(&delta));
        let e3 = ops.quad_field(|k| {
            let rhs3: SymTensor2<S> = ops.point(&r.q, k) + self.p[k].apply(&ops.point(&ebd, k)).scaled(a / one_a);
            self.n_inv[k].apply(&rhs3)
        });
        TripleField { u: e1, v: e2, q: e3 }
    }

    /// Applies `K` directly, for verification.
    pub fn apply_reference(
        x_state: &TripleField<S>,
        w: &[S],
        e: &TripleField<S>,
        map: &PointwiseMap<S>,
        a: S,
        ops: &DiscreteOperators<S>,
        mode: Mode,
    ) -> Result<TripleField<S>> {
        let rd = crate::resolvent::apply_resolvent_deriv(x_state, w, e, map, ops, mode)?;
        let mut out = apply_q_inv(e, ops);
        out.axpy(a, e);
        out.axpy(-a, &rd);
        Ok(out)
    }
}

fn inner_settings<S: Real>(s: &NewtonSettings<S>) -> NewtonSettings<S> {
    NewtonSettings { abs_tol: s.abs_tol * S::lit(1e-2), rel_tol: s.rel_tol * S::lit(1e-2), ..*s }
}

struct StepProblem<'a, S> {
    ops: &'a DiscreteOperators<S>,
    map: PointwiseMap<S>,
    settings: NewtonSettings<S>,
    /// Weight of the implicit operator term: `dt/λ` (implicit Euler) or `dt/(2λ)`.
    a: S,
    /// Everything in the residual that does not depend on the unknown.
    constant: TripleField<S>,
}

impl<'a, S: Real> StepProblem<'a, S> {
    /// `G(x) = Q⁻¹x + a(x − ℛ(x)) − constant`.
    fn residual(&self, x: &TripleField<S>, guess: &[S]) -> Result<(TripleField<S>, ResolventPoint<S>)> {
        let rp = resolvent_point(x, &self.map, self.ops, &self.settings, Some(guess))?;
        let mut g = apply_q_inv(x, self.ops);
        g.axpy(self.a, x);
        g.axpy(-self.a, &rp.value);
        g.axpy(-S::one(), &self.constant);
        Ok((g, rp))
    }

    fn solve(&self, start: &TripleField<S>, start_w: &[S], outer: &NewtonSettings<S>) -> Result<(TripleField<S>, Vec<S>, usize)> {
        let ops = self.ops;
        let tol = outer.tolerance(ops.h_norm(&self.constant));
        let mut x = start.clone();
        let (mut g, mut rp) = self.residual(&x, start_w)?;
        let mut gnorm = ops.h_norm(&g);
        for it in 0..outer.max_iter {
            if gnorm <= tol {
                return Ok((x, rp.value.u, it));
            }
            let sys = StepSystem::new(&self.map, &rp.map_arg, self.a, ops, Mode::Jvp)?;
            let step = sys.solve(&g, ops);
            let mut alpha = S::one();
            let mut accepted = false;
            for _ in 0..=outer.max_backtracks {
                let mut trial = x.clone();
                trial.axpy(-alpha, &step);
                let (gt, rpt) = self.residual(&trial, &rp.value.u)?;
                let nt = ops.h_norm(&gt);
                if nt < (S::one() - S::lit(1e-4) * alpha) * gnorm {
                    x = trial;
                    g = gt;
                    rp = rpt;
                    gnorm = nt;
                    accepted = true;
                    break;
                }
                alpha *= S::lit(0.5);
            }
            if !accepted {
                if gnorm <= S::lit(100.0) * tol {
                    return Ok((x, rp.value.u, it));
                }
                return Err(Error::LineSearchFailed { residual: gnorm.as_f64() });
            }
        }
        if gnorm <= tol {
            return Ok((x, rp.value.u, outer.max_iter));
        }
        Err(Error::NewtonNotConverged { iterations: outer.max_iter, residual: gnorm.as_f64() })
    }
}

/// Integrates the regularized evolution from `initial` under the load `f`.
pub fn solve_state<S: Real>(
    f: &ControlTrajectory<S>,
    initial: &TripleField<S>,
    params: FlowRuleParams<S>,
    regularization: Regularization,
    scheme: Scheme,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
) -> Result<StateTrajectory<S>> {
    let grid = f.grid;
    f.check_shape(&grid, ops.n_u())?;
    initial.check_shape(ops)?;
    let map = pointwise_map(regularization, params);
    let inner = inner_settings(settings);
    let dt = grid.dt();
    let lam = params.lambda;

    let rp0 = resolvent_point(initial, &map, ops, &inner, None).map_err(|e| e.at_step(0))?;
    let mut states = vec![initial.clone()];
    let mut resolvent_u = vec![rp0.value.u.clone()];
    let mut newton_iterations = vec![0];
    let mut prev_rp = rp0;
    for k in 1..=grid.steps {
        let prev = &states[k - 1];
        let (a, constant) = match scheme {
            Scheme::ImplicitEuler => {
                let mut c = apply_q_inv(prev, ops);
                c.axpy(dt, &load_field(&f.values[k], ops));
                (dt / lam, c)
            }
            Scheme::CrankNicolson => {
                let a = dt / (S::lit(2.0) * lam);
                let mut c = apply_q_inv(prev, ops);
                c.axpy(-a, prev);
                c.axpy(a, &prev_rp.value);
                c.axpy(dt / S::lit(2.0), &load_field(&f.values[k - 1], ops));
                c.axpy(dt / S::lit(2.0), &load_field(&f.values[k], ops));
                (a, c)
            }
        };
        let problem = StepProblem { ops, map, settings: inner, a, constant };
        let (x, w, its) = problem.solve(prev, &prev_rp.value.u, settings).map_err(|e| e.at_step(k))?;
        prev_rp = resolvent_from_w(&x, w.clone(), &map, ops);
        states.push(x);
        resolvent_u.push(w);
        newton_iterations.push(its);
    }
    Ok(StateTrajectory { grid, states, resolvent_u, params, regularization, scheme, newton_iterations })
}

/// Linearized step operators `K_k` (`k = 1..=N`) along a trajectory.
pub fn step_systems<S: Real>(
    base: &StateTrajectory<S>,
    ops: &DiscreteOperators<S>,
    mode: Mode,
) -> Result<Vec<StepSystem<S>>> {
    if base.scheme != Scheme::ImplicitEuler {
        return Err(Error::Unsupported("sensitivities are implemented for the implicit Euler scheme only".into()));
    }
    let map = base.map();
    let a = base.grid.dt() / base.params.lambda;
    (1..=base.grid.steps)
        .map(|k| {
            let rp = base.resolvent_at(k, ops);
            StepSystem::new(&map, &rp.map_arg, a, ops, mode).map_err(|e| e.at_step(k))
        })
        .collect()
}

/// Forward sensitivity of the trajectory in the load direction `g`.
pub fn solve_state_jvp<S: Real>(
    g: &ControlTrajectory<S>,
    base: &StateTrajectory<S>,
    ops: &DiscreteOperators<S>,
) -> Result<Vec<TripleField<S>>> {
    g.check_shape(&base.grid, ops.n_u())?;
    let systems = step_systems(base, ops, Mode::Jvp)?;
    let dt = base.grid.dt();
    let mut eta = vec![TripleField::zeros(ops)];
    for k in 1..=base.grid.steps {
        let mut r = apply_q_inv(&eta[k - 1], ops);
        r.axpy(dt, &load_field(&g.values[k], ops));
        eta.push(systems[k - 1].solve(&r, ops));
    }
    Ok(eta)
}

/// Per-step defect of the scheme identity in the state norm, relative to the
/// size of its terms.
pub fn scheme_residuals<S: Real>(
    traj: &StateTrajectory<S>,
    f: &ControlTrajectory<S>,
    ops: &DiscreteOperators<S>,
) -> Vec<S> {
    let dt = traj.grid.dt();
    (1..=traj.grid.steps)
        .map(|k| {
            let dq = apply_q_inv(&traj.states[k].sub(&traj.states[k - 1]), ops).scaled(S::one() / dt);
            let (op, load) = match traj.scheme {
                Scheme::ImplicitEuler => (traj.operator_at(k, ops), load_field(&f.values[k], ops)),
                Scheme::CrankNicolson => (
                    traj.operator_at(k, ops).add(&traj.operator_at(k - 1, ops)).scaled(S::lit(0.5)),
                    load_field(&f.values[k], ops).add(&load_field(&f.values[k - 1], ops)).scaled(S::lit(0.5)),
                ),
            };
            let res = dq.add(&op).sub(&load);
            let scale = ops.h_norm(&dq) + ops.h_norm(&op) + ops.h_norm(&load);
            ops.h_norm(&res) / scale.max(S::min_positive_value())
        })
        .collect()
}

/// Per-step defect of the discrete energy balance
/// `E_{k+1} − E_k = dt ⟨R f̄ − Ā, x̄⟩_H` (bars denote step averages), which the
/// Crank–Nicolson scheme satisfies exactly. Returned relative to the initial energy.
pub fn energy_balance_defects<S: Real>(
    traj: &StateTrajectory<S>,
    f: &ControlTrajectory<S>,
    ops: &DiscreteOperators<S>,
) -> Vec<S> {
    let dt = traj.grid.dt();
    let e0 = elastic_energy(&traj.states[0], ops).max(S::min_positive_value());
    (1..=traj.grid.steps)
        .map(|k| {
            let xbar = traj.states[k].add(&traj.states[k - 1]).scaled(S::lit(0.5));
            let abar = traj.operator_at(k, ops).add(&traj.operator_at(k - 1, ops)).scaled(S::lit(0.5));
            let fbar = load_field(&f.values[k], ops).add(&load_field(&f.values[k - 1], ops)).scaled(S::lit(0.5));
            let work = dt * ops.h_inner(&fbar.sub(&abar), &xbar);
            let de = elastic_energy(&traj.states[k], ops) - elastic_energy(&traj.states[k - 1], ops);
            (de - work).abs() / e0
        })
        .collect()
}

/// Momentum-balance defects of an implicit Euler trajectory at the resolvent
/// points, in the stress form `D∇w + E p` and in the plastic-strain form
/// `C(∇w − z)`. Each entry is `(q-form, z-form)`, relative to the inertia and
/// load terms.
pub fn momentum_residuals<S: Real>(
    traj: &StateTrajectory<S>,
    f: &ControlTrajectory<S>,
    ops: &DiscreteOperators<S>,
) -> Vec<(S, S)> {
    let dt = traj.grid.dt();
    let rho = ops.material.density;
    let mat = &ops.material;
    let dual_norm = |r: &[S]| dot(r, &ops.solve_mass(r)).max(S::zero()).sqrt();
    (1..=traj.grid.steps)
        .map(|k| {
            let rp = traj.resolvent_at(k, ops);
            let w = rp.w();
            let p = &rp.value.q;
            let inertia: Vec<S> = ops.mass_apply(&sub(&traj.states[k].v, &traj.states[k - 1].v)).iter().map(|&x| rho * x / dt).collect();
            let load = ops.mass_apply(&f.values[k]);
            let bw = ops.sym_grad(w);
            let mut sigma_q = ops.apply_tensor(&mat.stiffness_d, &bw);
            axpy(S::one(), &ops.apply_tensor(&mat.coupling_e, p), &mut sigma_q);
            let z = z_from_q(w, p, ops);
            let sigma_z = ops.apply_tensor(&mat.elasticity, &sub(&bw, &z));
            let scale = (dual_norm(&inertia) + dual_norm(&load)).max(S::min_positive_value());
            let defect = |sigma: &[S]| {
                let mut r = inertia.clone();
                axpy(S::one(), &ops.sym_grad_t_w(sigma), &mut r);
                axpy(-S::one(), &load, &mut r);
                dual_norm(&r) / scale
            };
            (defect(&sigma_q), defect(&sigma_z))
        })
        .collect()
}

/// Discrete `H¹(0,T; H)` norm: trapezoidal `L²` part plus difference quotients.
pub fn h1_time_norm<S: Real>(x: &[TripleField<S>], grid: &TimeGrid<S>, ops: &DiscreteOperators<S>) -> S {
    let w = grid.trapezoid_weights();
    let dt = grid.dt();
    let mut sum = S::zero();
    for (k, xk) in x.iter().enumerate() {
        sum += w[k] * ops.h_inner(xk, xk);
    }
    for k in 1..x.len() {
        let d = x[k].sub(&x[k - 1]);
        sum += ops.h_inner(&d, &d) / dt;
    }
    sum.sqrt()
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable<S> {
    pub lambdas: Vec<S>,
    /// `‖x^{λ_i} − x^{λ_{i+1}}‖` in the discrete `H¹(0,T; H)` norm.
    pub distances: Vec<S>,
}

impl<S: Real> ConvergenceTable<S> {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }
}

/// Solves the Yosida-regularized problem for each `λ` and tabulates the
/// distances between successive solutions.
pub fn convergence_study<S: Real>(
    f: &ControlTrajectory<S>,
    initial: &TripleField<S>,
    params: FlowRuleParams<S>,
    lambdas: &[S],
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
) -> Result<ConvergenceTable<S>> {
    if lambdas.len() < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least two values of lambda".into()));
    }
    let mut trajectories = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let p = params.with_regularization(lam, params.smoothing)?;
        trajectories.push(solve_state(f, initial, p, Regularization::Yosida, Scheme::ImplicitEuler, ops, settings)?);
    }
    let distances = trajectories
        .windows(2)
        .map(|pair| {
            let diff: Vec<TripleField<S>> = pair[0].states.iter().zip(&pair[1].states).map(|(a, b)| a.sub(b)).collect();
            h1_time_norm(&diff, &f.grid, ops)
        })
        .collect();
    Ok(ConvergenceTable { lambdas: lambdas.to_vec(), distances })
}
