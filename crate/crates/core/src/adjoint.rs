//! Tracking objective, backward adjoint recursion, control-space metric and
//! the reduced gradient.
//!
//! The adjoint recursion is the exact transpose of the implicit Euler
//! sensitivity recursion, so the reduced gradient is exact for the discrete
//! problem. With `φ_N = 0`,
//!
//! ```text
//! K_{k}* φ_{k-1} = Q⁻¹ φ_k − w_k Ψ′(x_k),   k = N, …, 1,
//! ```
//!
//! and the derivative of the tracking term in the load direction `g` is
//! `−Σ_{k≥1} dt ⟨M φ_{k-1,v}, g_k⟩`.

use crate::error::{Error, Result};
use crate::evolution::{apply_q_inv, step_systems, z_from_q, ControlTrajectory, StateTrajectory, TimeGrid};
use crate::flow_rule::Mode;
use crate::linalg::{dot, sub, Cholesky, DMat};
use crate::mesh::DiscreteOperators;
use crate::optimize::ReducedProblem;
use crate::resolvent::{apply_resolvent_deriv, TripleField};
use crate::scalar::Real;

/// Desired trajectory `(u_d, v_d, z_d)` per time node; the `q` slot of each
/// triple holds the target plastic strain.
#[derive(Debug, Clone)]
pub struct TrackingTarget<S> {
    pub states: Vec<TripleField<S>>,
}

impl<S: Real> TrackingTarget<S> {
    pub fn zeros(grid: &TimeGrid<S>, ops: &DiscreteOperators<S>) -> Self {
        Self { states: vec![TripleField::zeros(ops); grid.n_nodes()] }
    }

    /// Target equal to a trajectory, expressed in plastic strains.
    pub fn from_trajectory(traj: &StateTrajectory<S>, ops: &DiscreteOperators<S>) -> Self {
        let states = traj
            .states
            .iter()
            .map(|x| TripleField::new(x.u.clone(), x.v.clone(), z_from_q(&x.u, &x.q, ops)))
            .collect();
        Self { states }
    }

    pub fn check_shape(&self, grid: &TimeGrid<S>, ops: &DiscreteOperators<S>) -> Result<()> {
        if self.states.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: self.states.len() });
        }
        self.states.iter().try_for_each(|s| s.check_shape(ops))
    }
}

fn tracking_difference<S: Real>(x: &TripleField<S>, target: &TripleField<S>, ops: &DiscreteOperators<S>) -> TripleField<S> {
    TripleField::new(sub(&x.u, &target.u), sub(&x.v, &target.v), sub(&z_from_q(&x.u, &x.q, ops), &target.q))
}

/// `½‖(u − u_d, v − v_d, z − z_d)‖²_H` with `z = (C+B)⁻¹(C∇ˢu − q)`.
pub fn tracking_integrand<S: Real>(x: &TripleField<S>, target: &TripleField<S>, ops: &DiscreteOperators<S>) -> S {
    let d = tracking_difference(x, target, ops);
    S::lit(0.5) * ops.h_inner(&d, &d)
}

/// Trapezoidal time integral of [`tracking_integrand`].
pub fn tracking_objective<S: Real>(traj: &StateTrajectory<S>, target: &TrackingTarget<S>, ops: &DiscreteOperators<S>) -> S {
    let w = traj.grid.trapezoid_weights();
    traj.states.iter().zip(&target.states).zip(&w).fold(S::zero(), |s, ((x, t), &wk)| s + wk * tracking_integrand(x, t, ops))
}

/// Riesz representative in `H` of the derivative of [`tracking_integrand`]:
/// with `δz = z − z_d`, the triple `(û, v − v_d, −(C+B)⁻¹ δz)` where
/// `K_D(û − u + u_d) = Bᵀ W E δz`.
pub fn tracking_gradient<S: Real>(x: &TripleField<S>, target: &TripleField<S>, ops: &DiscreteOperators<S>) -> TripleField<S> {
    let d = tracking_difference(x, target, ops);
    let coupling = ops.sym_grad_t_w(&ops.apply_tensor(&ops.material.coupling_e, &d.q));
    let mut u = d.u.clone();
    crate::linalg::axpy(S::one(), &ops.solve_stiffness_d(&coupling), &mut u);
    let q = ops.apply_tensor(&ops.material.combined_inv, &d.q).into_iter().map(|x| -x).collect();
    TripleField::new(u, d.v, q)
}

#[derive(Debug, Clone)]
pub struct AdjointTrajectory<S> {
    pub grid: TimeGrid<S>,
    /// `φ_k` for `k = 0..=N`, with `φ_N = 0`.
    pub phi: Vec<TripleField<S>>,
    /// Inner adjoint displacement at step `k` (index `k − 1`).
    pub eta_star: Vec<Vec<S>>,
    /// Adjoint stress component `P*(Eᵀ B(η* − φ₁) + φ₃)` at step `k` (index `k − 1`).
    pub r_star: Vec<Vec<S>>,
}

/// Solves the backward adjoint recursion along `base` (implicit Euler only).
pub fn solve_adjoint<S: Real>(
    base: &StateTrajectory<S>,
    target: &TrackingTarget<S>,
    ops: &DiscreteOperators<S>,
) -> Result<AdjointTrajectory<S>> {
    target.check_shape(&base.grid, ops)?;
    let systems = step_systems(base, ops, Mode::Vjp)?;
    let n = base.grid.steps;
    let w = base.grid.trapezoid_weights();
    let map = base.map();
    let mut phi = vec![TripleField::zeros(ops); n + 1];
    let mut eta_star = vec![Vec::new(); n];
    let mut r_star = vec![Vec::new(); n];
    for k in (1..=n).rev() {
        let mut rhs = apply_q_inv(&phi[k], ops);
        rhs.axpy(-w[k], &tracking_gradient(&base.states[k], &target.states[k], ops));
        phi[k - 1] = systems[k - 1].solve(&rhs, ops);
        let adj = apply_resolvent_deriv(&base.states[k], &base.resolvent_u[k], &phi[k - 1], &map, ops, Mode::Vjp)
            .map_err(|e| e.at_step(k))?;
        eta_star[k - 1] = adj.u;
        r_star[k - 1] = adj.q;
    }
    Ok(AdjointTrajectory { grid: base.grid, phi, eta_star, r_star })
}

/// Coefficient vector `ℓ` with `dΨ/df · g = −⟨ℓ, g⟩`: `ℓ_k = dt M φ_{k−1,v}`, `ℓ_0 = 0`.
pub fn gradient_load<S: Real>(adjoint: &AdjointTrajectory<S>, ops: &DiscreteOperators<S>) -> ControlTrajectory<S> {
    let dt = adjoint.grid.dt();
    ControlTrajectory::from_fn(adjoint.grid, |k, _| {
        if k == 0 {
            vec![S::zero(); ops.n_u()]
        } else {
            ops.mass_apply(&adjoint.phi[k - 1].v).into_iter().map(|x| dt * x).collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlSpace {
    /// `H¹₀(0,T; H¹)`-type space: loads vanish at both ends of the time interval,
    /// norm `‖ḟ‖²_{L²} + ‖∇f‖²_{L²}`.
    #[default]
    ZeroEnds,
    /// `H¹(0,T; L²)`: norm `‖ḟ‖²_{L²} + ‖f‖²_{L²}`, no end conditions.
    H1L2,
}

/// Cholesky factorization of a symmetric positive definite block-tridiagonal matrix.
#[derive(Debug, Clone)]
struct BlockTridiagCholesky<S> {
    diag: Vec<Cholesky<S>>,
    /// `C_i = O_i L_{i−1}⁻ᵀ` for `i ≥ 1` (index `i − 1`).
    coupling: Vec<DMat<S>>,
}

impl<S: Real> BlockTridiagCholesky<S> {
    /// `diag[i]` are the diagonal blocks, `off[i]` the block at `(i + 1, i)`.
    fn factor(diag: &[DMat<S>], off: &[DMat<S>]) -> Result<Self> {
        let mut l = Vec::with_capacity(diag.len());
        let mut coupling = Vec::with_capacity(off.len());
        l.push(Cholesky::factor(&diag[0])?);
        for i in 1..diag.len() {
            let o = &off[i - 1];
            let prev: &Cholesky<S> = &l[i - 1];
            let n = o.rows();
            // rows of C_i solve L_{i−1} cᵀ = oᵀ
            let mut c = DMat::zeros(n, o.cols());
            for r in 0..n {
                let row = prev.forward(o.row(r));
                for (j, v) in row.into_iter().enumerate() {
                    c[(r, j)] = v;
                }
            }
            let mut d = diag[i].clone();
            d.add_scaled(-S::one(), &c.matmul(&c.transpose()));
            l.push(Cholesky::factor(&d)?);
            coupling.push(c);
        }
        Ok(Self { diag: l, coupling })
    }

    fn solve(&self, b: &[Vec<S>]) -> Vec<Vec<S>> {
        let m = self.diag.len();
        let mut y: Vec<Vec<S>> = Vec::with_capacity(m);
        for i in 0..m {
            let mut rhs = b[i].clone();
            if i > 0 {
                let cy = self.coupling[i - 1].matvec(&y[i - 1]);
                crate::linalg::axpy(-S::one(), &cy, &mut rhs);
            }
            y.push(self.diag[i].forward(&rhs));
        }
        let mut x = vec![Vec::new(); m];
        for i in (0..m).rev() {
            let mut rhs = y[i].clone();
            if i + 1 < m {
                let ctx = self.coupling[i].matvec_t(&x[i + 1]);
                crate::linalg::axpy(-S::one(), &ctx, &mut rhs);
            }
            x[i] = self.diag[i].backward(&rhs);
        }
        x
    }
}

/// Inner product of the control space on time-discrete loads, with a
/// factorization of its Gram operator for Riesz solves.
#[derive(Debug, Clone)]
pub struct ControlMetric<S> {
    pub space: ControlSpace,
    pub grid: TimeGrid<S>,
    mass: DMat<S>,
    spatial: DMat<S>,
    factor: BlockTridiagCholesky<S>,
}

impl<S: Real> ControlMetric<S> {
    pub fn new(space: ControlSpace, grid: TimeGrid<S>, ops: &DiscreteOperators<S>) -> Result<Self> {
        if space == ControlSpace::ZeroEnds && grid.steps < 2 {
            return Err(Error::InvalidParameter("loads vanishing at both ends need at least two time steps".into()));
        }
        let mass = ops.mass.clone();
        let spatial = match space {
            ControlSpace::ZeroEnds => ops.laplacian.clone(),
            ControlSpace::H1L2 => ops.mass.clone(),
        };
        let dt = grid.dt();
        let w = grid.trapezoid_weights();
        let active: Vec<usize> = Self::active_nodes(space, &grid).collect();
        let diag: Vec<DMat<S>> = active
            .iter()
            .map(|&k| {
                let links = usize::from(k > 0) + usize::from(k < grid.steps);
                let mut d = mass.scaled(S::lit(links as f64) / dt);
                d.add_scaled(w[k], &spatial);
                d
            })
            .collect();
        let off = vec![mass.scaled(-S::one() / dt); active.len().saturating_sub(1)];
        let factor = BlockTridiagCholesky::factor(&diag, &off)?;
        Ok(Self { space, grid, mass, spatial, factor })
    }

    fn active_nodes(space: ControlSpace, grid: &TimeGrid<S>) -> std::ops::Range<usize> {
        match space {
            ControlSpace::ZeroEnds => 1..grid.steps,
            ControlSpace::H1L2 => 0..grid.steps + 1,
        }
    }

    pub fn active(&self) -> std::ops::Range<usize> {
        Self::active_nodes(self.space, &self.grid)
    }

    /// Zeroes the nodes that the control space pins to zero.
    pub fn project(&self, f: &ControlTrajectory<S>) -> ControlTrajectory<S> {
        let active = self.active();
        ControlTrajectory::from_fn(self.grid, |k, _| {
            if active.contains(&k) {
                f.values[k].clone()
            } else {
                vec![S::zero(); f.values[k].len()]
            }
        })
    }

    /// Checks that `f` belongs to the control space.
    pub fn check_admissible(&self, f: &ControlTrajectory<S>) -> Result<()> {
        let active = self.active();
        for (k, v) in f.values.iter().enumerate() {
            if !active.contains(&k) && v.iter().any(|x| *x != S::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "load at time node {k} must vanish in the zero-ends control space"
                )));
            }
        }
        Ok(())
    }

    pub fn inner(&self, f: &ControlTrajectory<S>, g: &ControlTrajectory<S>) -> S {
        let dt = self.grid.dt();
        let w = self.grid.trapezoid_weights();
        let f = self.project(f);
        let g = self.project(g);
        let mut s = S::zero();
        for k in 0..self.grid.steps {
            let df = sub(&f.values[k + 1], &f.values[k]);
            let dg = sub(&g.values[k + 1], &g.values[k]);
            s += dot(&df, &self.mass.matvec(&dg)) / dt;
        }
        for k in 0..=self.grid.steps {
            s += w[k] * dot(&f.values[k], &self.spatial.matvec(&g.values[k]));
        }
        s
    }

    pub fn norm(&self, f: &ControlTrajectory<S>) -> S {
        self.inner(f, f).max(S::zero()).sqrt()
    }

    /// Riesz representative: the `r` with `⟨r, g⟩_X = ⟨ℓ, g⟩` for all admissible `g`.
    pub fn riesz(&self, load: &ControlTrajectory<S>) -> ControlTrajectory<S> {
        let active = self.active();
        let rhs: Vec<Vec<S>> = active.clone().map(|k| load.values[k].clone()).collect();
        let sol = self.factor.solve(&rhs);
        let mut out = ControlTrajectory::zeros(self.grid, load.values[0].len());
        for (k, v) in active.zip(sol) {
            out.values[k] = v;
        }
        out
    }
}

/// Reduced gradient `f − α⁻¹ G⁻¹ ℓ`, scaled so that `F′(f)g = α⟨grad, g⟩_X`.
pub fn reduced_gradient<S: Real>(
    f: &ControlTrajectory<S>,
    adjoint: &AdjointTrajectory<S>,
    alpha: S,
    metric: &ControlMetric<S>,
    ops: &DiscreteOperators<S>,
) -> ControlTrajectory<S> {
    let mut g = metric.project(f);
    g.axpy(-S::one() / alpha, &metric.riesz(&gradient_load(adjoint, ops)));
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEntry<S> {
    pub finite_difference: S,
    pub adjoint: S,
    pub relative_error: S,
}

#[derive(Debug, Clone)]
pub struct FdReport<S> {
    pub entries: Vec<FdEntry<S>>,
}

impl<S: Real> FdReport<S> {
    pub fn max_relative_error(&self) -> S {
        self.entries.iter().fold(S::zero(), |m, e| m.max(e.relative_error))
    }
}

/// Compares `α⟨grad, g⟩_X` with central differences of the reduced objective.
pub fn fd_check<S: Real>(
    problem: &ReducedProblem<S>,
    f: &ControlTrajectory<S>,
    directions: &[ControlTrajectory<S>],
    eps: S,
) -> Result<FdReport<S>> {
    let eval = problem.gradient(f)?;
    let mut entries = Vec::with_capacity(directions.len());
    for g in directions {
        let g = problem.metric.project(g);
        let mut fp = f.clone();
        fp.axpy(eps, &g);
        let mut fm = f.clone();
        fm.axpy(-eps, &g);
        let (vp, vm) = (problem.objective(&fp)?.value, problem.objective(&fm)?.value);
        let fd = (vp - vm) / (S::lit(2.0) * eps);
        let ad = problem.alpha * problem.metric.inner(&eval.gradient, &g);
        // rounding level of the difference quotient
        let noise = S::epsilon() * vp.abs().max(vm.abs()) / eps;
        let scale = fd.abs().max(ad.abs()).max(noise).max(S::min_positive_value());
        entries.push(FdEntry { finite_difference: fd, adjoint: ad, relative_error: (fd - ad).abs() / scale });
    }
    Ok(FdReport { entries })
}
