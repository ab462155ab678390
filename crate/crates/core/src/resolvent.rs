//! Resolvent of the evolution operator.
//!
//! For a state `h = (h₁, h₂, h₃)` the resolvent value is obtained from a single
//! nonlinear elliptic solve for the displacement `w = T(h)`:
//!
//! ```text
//! Bᵀ W [D B w + E R(Eᵀ B(w − h₁) + h₃)] + M (w − h₁)/λ² = M h₂/λ
//! ```
//!
//! after which `ℛ(h) = (w, (w − h₁)/λ, R(Eᵀ B(w − h₁) + h₃))` and the
//! regularized operator is `A(x) = (x − ℛ(x))/λ`. Here `R` is a pointwise
//! monotone map ([`PointwiseMap`]): the projection for the Yosida
//! regularization, or the smoothed resolvent.

use crate::error::{Error, Result};
use crate::flow_rule::{Mode, PointwiseMap};
use crate::linalg::{axpy, dot, norm2, sub, Lu};
use crate::mesh::DiscreteOperators;
use crate::scalar::Real;
use crate::tensor::{Rank4Tensor, SymTensor2};

/// State triple: free-dof displacement, free-dof velocity and a quadrature stress field.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleField<S> {
    pub u: Vec<S>,
    pub v: Vec<S>,
    pub q: Vec<S>,
}

impl<S: Real> TripleField<S> {
    pub fn new(u: Vec<S>, v: Vec<S>, q: Vec<S>) -> Self {
        Self { u, v, q }
    }

    pub fn zeros(ops: &DiscreteOperators<S>) -> Self {
        Self { u: vec![S::zero(); ops.n_u()], v: vec![S::zero(); ops.n_u()], q: vec![S::zero(); ops.n_q()] }
    }

    pub fn check_shape(&self, ops: &DiscreteOperators<S>) -> Result<()> {
        for (len, expected) in [(self.u.len(), ops.n_u()), (self.v.len(), ops.n_u()), (self.q.len(), ops.n_q())] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, got: len });
            }
        }
        Ok(())
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: S, other: &Self) {
        axpy(a, &other.u, &mut self.u);
        axpy(a, &other.v, &mut self.v);
        axpy(a, &other.q, &mut self.q);
    }

    pub fn scaled(&self, a: S) -> Self {
        let f = |x: &Vec<S>| x.iter().map(|&y| a * y).collect();
        Self { u: f(&self.u), v: f(&self.v), q: f(&self.q) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(S::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-S::one(), other);
        out
    }

    /// `(u, −v, q)`. Conjugating with this reflection turns `ℛ′` built from
    /// `Pᵀ` into the `H`-adjoint of `ℛ′`, because the evolution operator is
    /// skew in the velocity coupling.
    pub fn velocity_flipped(&self) -> Self {
        Self { u: self.u.clone(), v: self.v.iter().map(|&x| -x).collect(), q: self.q.clone() }
    }

    /// Euclidean coefficient product.
    pub fn coeff_dot(&self, other: &Self) -> S {
        dot(&self.u, &other.u) + dot(&self.v, &other.v) + dot(&self.q, &other.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings<S> {
    pub abs_tol: S,
    pub rel_tol: S,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_backtracks: usize,
}

impl<S: Real> Default for NewtonSettings<S> {
    fn default() -> Self {
        Self { abs_tol: S::lit(1e-11), rel_tol: S::lit(1e-10), max_iter: 50, max_backtracks: 30 }
    }
}

impl<S: Real> NewtonSettings<S> {
    pub fn tolerance(&self, scale: S) -> S {
        self.abs_tol + self.rel_tol * scale
    }
}

#[derive(Debug, Clone)]
pub struct TSolve<S> {
    pub u: Vec<S>,
    pub iterations: usize,
    pub residual: S,
}

/// Resolvent value together with the inner solve data it was computed from.
#[derive(Debug, Clone)]
pub struct ResolventPoint<S> {
    pub value: TripleField<S>,
    /// Argument `Eᵀ B(w − h₁) + h₃` of the pointwise map.
    pub map_arg: Vec<S>,
    pub iterations: usize,
}

impl<S: Real> ResolventPoint<S> {
    pub fn w(&self) -> &[S] {
        &self.value.u
    }
}

fn map_argument<S: Real>(h: &TripleField<S>, w: &[S], ops: &DiscreteOperators<S>) -> Vec<S> {
    let g = ops.sym_grad(&sub(w, &h.u));
    let mut y = ops.apply_tensor_transpose(&ops.material.coupling_e, &g);
    axpy(S::one(), &h.q, &mut y);
    y
}

fn apply_map<S: Real>(map: &PointwiseMap<S>, y: &[S], ops: &DiscreteOperators<S>) -> Vec<S> {
    ops.quad_field(|p| map.apply(&ops.point(y, p)))
}

/// Pointwise derivative matrices of the map at `y` (transposed in `Vjp` mode).
pub fn map_derivatives<S: Real>(
    map: &PointwiseMap<S>,
    y: &[S],
    ops: &DiscreteOperators<S>,
    mode: Mode,
) -> Vec<Rank4Tensor<S>> {
    (0..ops.n_points()).map(|p| map.deriv_matrix(&ops.point(y, p), mode)).collect()
}

fn apply_point_matrices<S: Real>(mats: &[Rank4Tensor<S>], x: &[S], ops: &DiscreteOperators<S>) -> Vec<S> {
    ops.quad_field(|p| mats[p].apply(&ops.point(x, p)))
}

/// Residual of the inner equation and the right-hand-side scale used for its tolerance.
fn t_residual<S: Real>(
    h: &TripleField<S>,
    u: &[S],
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
) -> (Vec<S>, Vec<S>) {
    let lam = map.lambda();
    let y = map_argument(h, u, ops);
    let r0 = apply_map(map, &y, ops);
    let mut sigma = ops.apply_tensor(&ops.material.stiffness_d, &ops.sym_grad(u));
    axpy(S::one(), &ops.apply_tensor(&ops.material.coupling_e, &r0), &mut sigma);
    let mut r = ops.sym_grad_t_w(&sigma);
    let du = sub(u, &h.u);
    let mdu = ops.mass_apply(&du);
    let mh2 = ops.mass_apply(&h.v);
    for i in 0..r.len() {
        r[i] += mdu[i] / (lam * lam) - mh2[i] / lam;
    }
    (r, y)
}

fn t_scale<S: Real>(h: &TripleField<S>, map: &PointwiseMap<S>, ops: &DiscreteOperators<S>) -> S {
    let lam = map.lambda();
    let eh3 = ops.apply_tensor(&ops.material.coupling_e, &h.q);
    norm2(&ops.mass_apply(&h.u)) / (lam * lam) + norm2(&ops.mass_apply(&h.v)) / lam + norm2(&ops.sym_grad_t_w(&eh3))
}

/// `Bᵀ W (D + E P Eᵀ) B + M/λ²` for pointwise matrices `P`.
fn t_jacobian<S: Real>(
    mats: &[Rank4Tensor<S>],
    lam: S,
    ops: &DiscreteOperators<S>,
) -> crate::linalg::DMat<S> {
    let e = ops.material.coupling_e;
    let d = ops.material.stiffness_d;
    let mut j = ops.assemble_point_stiffness(|p| d.add(&e.compose(&mats[p]).compose(&e.transpose())));
    j.add_scaled(S::one() / (lam * lam), &ops.mass);
    j
}

/// Solves the inner equation for `w = T(h)` by Newton's method with
/// backtracking, starting from `guess`.
pub fn solve_t_from<S: Real>(
    h: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
    guess: &[S],
) -> Result<TSolve<S>> {
    h.check_shape(ops)?;
    if guess.len() != ops.n_u() {
        return Err(Error::DimensionMismatch { expected: ops.n_u(), got: guess.len() });
    }
    let lam = map.lambda();
    let tol = settings.tolerance(t_scale(h, map, ops));
    let mut u = guess.to_vec();
    let (mut r, mut y) = t_residual(h, &u, map, ops);
    let mut rnorm = norm2(&r);
    for it in 0..settings.max_iter {
        if rnorm <= tol {
            return Ok(TSolve { u, iterations: it, residual: rnorm });
        }
        let mats = map_derivatives(map, &y, ops, Mode::Jvp);
        let jac = t_jacobian(&mats, lam, ops);
        let step = Lu::factor(&jac)?.solve(&r);
        let mut alpha = S::one();
        let mut accepted = false;
        for _ in 0..=settings.max_backtracks {
            let mut trial = u.clone();
            axpy(-alpha, &step, &mut trial);
            let (rt, yt) = t_residual(h, &trial, map, ops);
            let nt = norm2(&rt);
            if nt < (S::one() - S::lit(1e-4) * alpha) * rnorm {
                u = trial;
                r = rt;
                y = yt;
                rnorm = nt;
                accepted = true;
                break;
            }
            alpha *= S::lit(0.5);
        }
        if !accepted {
            if rnorm <= S::lit(100.0) * tol {
                return Ok(TSolve { u, iterations: it, residual: rnorm });
            }
            return Err(Error::LineSearchFailed { residual: rnorm.as_f64() });
        }
    }
    if rnorm <= tol {
        return Ok(TSolve { u, iterations: settings.max_iter, residual: rnorm });
    }
    Err(Error::NewtonNotConverged { iterations: settings.max_iter, residual: rnorm.as_f64() })
}

/// `T(h)`, warm-started at `h₁`.
pub fn solve_t<S: Real>(
    h: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
) -> Result<Vec<S>> {
    Ok(solve_t_from(h, map, ops, settings, &h.u)?.u)
}

/// Assembles `ℛ(h)` from a solved displacement `w = T(h)`.
pub fn resolvent_from_w<S: Real>(
    h: &TripleField<S>,
    w: Vec<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
) -> ResolventPoint<S> {
    let lam = map.lambda();
    let y = map_argument(h, &w, ops);
    let q = apply_map(map, &y, ops);
    let v = sub(&w, &h.u).into_iter().map(|x| x / lam).collect();
    ResolventPoint { value: TripleField { u: w, v, q }, map_arg: y, iterations: 0 }
}

pub fn resolvent_point<S: Real>(
    h: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
    guess: Option<&[S]>,
) -> Result<ResolventPoint<S>> {
    let sol = solve_t_from(h, map, ops, settings, guess.unwrap_or(&h.u))?;
    let mut point = resolvent_from_w(h, sol.u, map, ops);
    point.iterations = sol.iterations;
    Ok(point)
}

/// `ℛ(h)`.
pub fn apply_resolvent<S: Real>(
    h: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
) -> Result<TripleField<S>> {
    Ok(resolvent_point(h, map, ops, settings, None)?.value)
}

/// Regularized operator `A(x) = (x − ℛ(x))/λ`.
pub fn apply_regularized<S: Real>(
    x: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    settings: &NewtonSettings<S>,
) -> Result<TripleField<S>> {
    let r = apply_resolvent(x, map, ops, settings)?;
    Ok(x.sub(&r).scaled(S::one() / map.lambda()))
}

/// Directional derivative `T′(h)g` given the solved base displacement
/// `w = T(h)`. In `Vjp` mode the pointwise derivative is replaced by its transpose.
pub fn solve_t_deriv<S: Real>(
    h: &TripleField<S>,
    w: &[S],
    g: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    mode: Mode,
) -> Result<Vec<S>> {
    let y = map_argument(h, w, ops);
    let mats = map_derivatives(map, &y, ops, mode);
    t_deriv_with(&mats, g, map.lambda(), ops)
}

fn t_deriv_with<S: Real>(
    mats: &[Rank4Tensor<S>],
    g: &TripleField<S>,
    lam: S,
    ops: &DiscreteOperators<S>,
) -> Result<Vec<S>> {
    g.check_shape(ops)?;
    let e = ops.material.coupling_e;
    let mut arg = ops.apply_tensor_transpose(&e, &ops.sym_grad(&g.u));
    axpy(-S::one(), &g.q, &mut arg);
    let pe = apply_point_matrices(mats, &arg, ops);
    let mut rhs = ops.sym_grad_t_w(&ops.apply_tensor(&e, &pe));
    let m1 = ops.mass_apply(&g.u);
    let m2 = ops.mass_apply(&g.v);
    for i in 0..rhs.len() {
        rhs[i] += m1[i] / (lam * lam) + m2[i] / lam;
    }
    let jac = t_jacobian(mats, lam, ops);
    Ok(Lu::factor(&jac)?.solve(&rhs))
}

/// `ℛ′(h)g` in `Jvp` mode and the `H`-adjoint `ℛ′(h)*g` in `Vjp` mode, given `w = T(h)`.
///
/// The adjoint is `ℛ′(h)*ξ = (η*, (ξ₁ − η*)/λ, Pᵀ(Eᵀ B(η* − ξ₁) + ξ₃))` with
/// `J* η* = Bᵀ W E Pᵀ(Eᵀ B ξ₁ − ξ₃) + M ξ₁/λ² − M ξ₂/λ`, i.e. the forward
/// formula with `Pᵀ`, conjugated by the velocity reflection.
pub fn apply_resolvent_deriv<S: Real>(
    h: &TripleField<S>,
    w: &[S],
    g: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    mode: Mode,
) -> Result<TripleField<S>> {
    match mode {
        Mode::Jvp => resolvent_deriv_structured(h, w, g, map, ops, Mode::Jvp),
        Mode::Vjp => Ok(resolvent_deriv_structured(h, w, &g.velocity_flipped(), map, ops, Mode::Vjp)?.velocity_flipped()),
    }
}

fn resolvent_deriv_structured<S: Real>(
    h: &TripleField<S>,
    w: &[S],
    g: &TripleField<S>,
    map: &PointwiseMap<S>,
    ops: &DiscreteOperators<S>,
    mode: Mode,
) -> Result<TripleField<S>> {
    let lam = map.lambda();
    let y = map_argument(h, w, ops);
    let mats = map_derivatives(map, &y, ops, mode);
    let eta = t_deriv_with(&mats, g, lam, ops)?;
    let diff = sub(&eta, &g.u);
    let mut arg = ops.apply_tensor_transpose(&ops.material.coupling_e, &ops.sym_grad(&diff));
    axpy(S::one(), &g.q, &mut arg);
    let q = apply_point_matrices(&mats, &arg, ops);
    let v = diff.iter().map(|&x| x / lam).collect();
    Ok(TripleField { u: eta, v, q })
}

/// Discrete evolution operator with a single-valued pointwise flow `a`:
/// `(−v, M⁻¹ Bᵀ W(D B u + E q), a(q) − Eᵀ B v)`.
pub fn apply_evolution_operator<S: Real>(
    x: &TripleField<S>,
    flow: impl Fn(&SymTensor2<S>) -> SymTensor2<S>,
    ops: &DiscreteOperators<S>,
) -> TripleField<S> {
    let e = ops.material.coupling_e;
    let mut sigma = ops.apply_tensor(&ops.material.stiffness_d, &ops.sym_grad(&x.u));
    axpy(S::one(), &ops.apply_tensor(&e, &x.q), &mut sigma);
    let v = ops.solve_mass(&ops.sym_grad_t_w(&sigma));
    let ebv = ops.apply_tensor_transpose(&e, &ops.sym_grad(&x.v));
    let q = ops.quad_field(|p| flow(&ops.point(&x.q, p)) - ops.point(&ebv, p));
    TripleField { u: x.v.iter().map(|&a| -a).collect(), v, q }
}
