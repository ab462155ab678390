//! Pointwise plastic flow rule: projection onto the admissible set
//! `K = {τ : |τᴰ| ≤ γ}`, its Yosida approximation, and the `C¹` smoothed
//! resolvent that replaces the projection in the regularized problem.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Rank4Tensor, SymTensor2};

/// Direction of a derivative application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Apply the derivative `R′(t)h`.
    #[default]
    Jvp,
    /// Apply its adjoint `R′(t)*h`.
    Vjp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRuleParams<S> {
    /// Radius `γ` of the admissible deviatoric ball.
    pub yield_stress: S,
    /// Yosida parameter `λ`.
    pub lambda: S,
    /// Smoothing width `s ∈ (0, 1)`.
    pub smoothing: S,
}

impl<S: Real> FlowRuleParams<S> {
    pub fn new(yield_stress: S, lambda: S, smoothing: S) -> Result<Self> {
        if !(yield_stress > S::zero()) {
            return Err(Error::InvalidParameter(format!("yield stress must be positive, got {yield_stress}")));
        }
        if !(lambda > S::zero()) {
            return Err(Error::InvalidParameter(format!("regularization lambda must be positive, got {lambda}")));
        }
        if !(smoothing > S::zero() && smoothing < S::one()) {
            return Err(Error::InvalidParameter(format!("smoothing s must lie in (0, 1), got {smoothing}")));
        }
        Ok(Self { yield_stress, lambda, smoothing })
    }

    pub fn with_regularization(&self, lambda: S, smoothing: S) -> Result<Self> {
        Self::new(self.yield_stress, lambda, smoothing)
    }
}

/// Orthogonal projection onto `K`: `t − max{0, 1 − γ/|tᴰ|}·tᴰ`.
pub fn project_admissible<S: Real>(t: &SymTensor2<S>, yield_stress: S) -> SymTensor2<S> {
    let dev = t.deviator();
    let nd = dev.norm();
    if nd <= yield_stress {
        return *t;
    }
    *t - dev * (S::one() - yield_stress / nd)
}

/// Yosida approximation `(t − π_K t)/λ` of the subdifferential of the indicator of `K`.
pub fn yosida_flow<S: Real>(t: &SymTensor2<S>, params: &FlowRuleParams<S>) -> SymTensor2<S> {
    (*t - project_admissible(t, params.yield_stress)) * (S::one() / params.lambda)
}

/// `C¹` smoothing of `max{0, r}` with width `s`.
pub fn smooth_max<S: Real>(r: S, s: S) -> S {
    if r >= s {
        r
    } else if r <= -s {
        S::zero()
    } else {
        (r + s) * (r + s) / (S::lit(4.0) * s)
    }
}

pub fn smooth_max_deriv<S: Real>(r: S, s: S) -> S {
    if r >= s {
        S::one()
    } else if r <= -s {
        S::zero()
    } else {
        (r + s) / (S::lit(2.0) * s)
    }
}

/// Smoothed resolvent `t − max_s(1 − γ/|tᴰ|)·tᴰ`.
pub fn smooth_resolvent<S: Real>(t: &SymTensor2<S>, yield_stress: S, s: S) -> SymTensor2<S> {
    let dev = t.deviator();
    let nd = dev.norm();
    if nd <= yield_stress / (S::one() + s) {
        return *t;
    }
    *t - dev * smooth_max(S::one() - yield_stress / nd, s)
}

/// Derivative of [`smooth_resolvent`]; the derivative is self-adjoint so both modes agree.
pub fn smooth_resolvent_deriv<S: Real>(
    t: &SymTensor2<S>,
    h: &SymTensor2<S>,
    yield_stress: S,
    s: S,
    _mode: Mode,
) -> SymTensor2<S> {
    let dev = t.deviator();
    let nd = dev.norm();
    if nd <= yield_stress / (S::one() + s) {
        return *h;
    }
    let r = S::one() - yield_stress / nd;
    let hd = h.deviator();
    let radial = smooth_max_deriv(r, s) * yield_stress / (nd * nd * nd) * dev.dot(h);
    *h - dev * radial - hd * smooth_max(r, s)
}

/// Element of the generalized (Newton) derivative of [`project_admissible`].
pub fn projection_deriv<S: Real>(
    t: &SymTensor2<S>,
    h: &SymTensor2<S>,
    yield_stress: S,
    _mode: Mode,
) -> SymTensor2<S> {
    let dev = t.deviator();
    let nd = dev.norm();
    if nd <= yield_stress {
        return *h;
    }
    let hd = h.deviator();
    *h - hd * (S::one() - yield_stress / nd) - dev * (yield_stress / (nd * nd * nd) * dev.dot(h))
}

/// Pointwise bound `γs / (4λ(1 − s))` on `|A_λ(t) − A_s(t)|`, uniform in `t`.
pub fn yosida_gap_bound<S: Real>(params: &FlowRuleParams<S>) -> S {
    params.yield_stress * params.smoothing
        / (S::lit(4.0) * params.lambda * (S::one() - params.smoothing))
}

/// The bound of [`yosida_gap_bound`] carried over to the `L²(Ω)` norm on a domain of the given measure.
pub fn yosida_gap_bound_l2<S: Real>(params: &FlowRuleParams<S>, domain_measure: S) -> S {
    yosida_gap_bound(params) * domain_measure.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// Projection onto `K` (Yosida regularization only).
    Projection,
    /// Smoothed resolvent `R_s`.
    Smooth,
    /// The zero map; turns the inner problem into a linear elliptic solve.
    Zero,
}

/// Pointwise monotone map used inside the resolvent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseMap<S> {
    pub kind: MapKind,
    pub params: FlowRuleParams<S>,
}

impl<S: Real> PointwiseMap<S> {
    pub fn new(kind: MapKind, params: FlowRuleParams<S>) -> Self {
        Self { kind, params }
    }

    pub fn lambda(&self) -> S {
        self.params.lambda
    }

    pub fn apply(&self, t: &SymTensor2<S>) -> SymTensor2<S> {
        match self.kind {
            MapKind::Projection => project_admissible(t, self.params.yield_stress),
            MapKind::Smooth => smooth_resolvent(t, self.params.yield_stress, self.params.smoothing),
            MapKind::Zero => SymTensor2::zeros(t.dim()),
        }
    }

    pub fn deriv(&self, t: &SymTensor2<S>, h: &SymTensor2<S>, mode: Mode) -> SymTensor2<S> {
        match self.kind {
            MapKind::Projection => projection_deriv(t, h, self.params.yield_stress, mode),
            MapKind::Smooth => smooth_resolvent_deriv(t, h, self.params.yield_stress, self.params.smoothing, mode),
            MapKind::Zero => SymTensor2::zeros(t.dim()),
        }
    }

    /// Mandel matrix of the derivative at `t` (transposed in `Vjp` mode).
    pub fn deriv_matrix(&self, t: &SymTensor2<S>, mode: Mode) -> Rank4Tensor<S> {
        let dim = t.dim();
        let n = t.nv();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = SymTensor2::zeros(dim);
            e.as_mut_slice()[j] = S::one();
            cols.push(self.deriv(t, &e, Mode::Jvp));
        }
        let m = Rank4Tensor::from_fn(dim, |i, j| cols[j].as_slice()[i]);
        match mode {
            Mode::Jvp => m,
            Mode::Vjp => m.transpose(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(dim: usize, v: &[f64]) -> SymTensor2<f64> {
        SymTensor2::from_mandel(dim, &v[..crate::tensor::nv(dim)]).unwrap()
    }

    #[test]
    fn projection_inside_is_identity_and_outside_hits_sphere() {
        let t = SymTensor2::<f64>::from_matrix(2, &[[0.1, 0.05, 0.0], [0.05, -0.2, 0.0], [0.0; 3]]);
        assert_eq!(project_admissible(&t, 1.0), t);
        let big = t.scaled(100.0);
        let p = project_admissible(&big, 1.0);
        assert!((p.deviator().norm() - 1.0).abs() < 1e-12);
        assert!((p.trace() - big.trace()).abs() < 1e-12);
    }

    #[test]
    fn smooth_max_values() {
        assert_eq!(smooth_max(0.5f64, 0.2), 0.5);
        assert_eq!(smooth_max(-0.5f64, 0.2), 0.0);
        assert!((smooth_max(0.0f64, 0.2) - 0.05).abs() < 1e-15);
        assert!((smooth_max_deriv(0.0f64, 0.2) - 0.5).abs() < 1e-15);
        // continuity at the branch points
        assert!((smooth_max(0.2f64 - 1e-12, 0.2) - 0.2).abs() < 1e-11);
        assert!(smooth_max(-0.2f64 + 1e-12, 0.2) < 1e-11);
    }

    #[test]
    fn smooth_resolvent_identity_branch() {
        // |tᴰ| = γ/(1+s) exactly
        let gamma = 1.0;
        let s = 0.25;
        let dir = SymTensor2::from_matrix(2, &[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0; 3]]);
        let t = dir.scaled(gamma / (1.0 + s) / dir.norm());
        assert_eq!(smooth_resolvent(&t, gamma, s), t);
        let zero_dev = SymTensor2::identity(2).scaled(3.0);
        assert_eq!(smooth_resolvent(&zero_dev, gamma, s), zero_dev);
    }

    #[test]
    fn gap_bound_example() {
        let p = FlowRuleParams::new(2f64.sqrt(), 0.1, 0.2).unwrap();
        let b = yosida_gap_bound(&p);
        assert!((b - 2f64.sqrt() * 0.2 / (4.0 * 0.1 * 0.8)).abs() < 1e-14);
        assert!((b - 0.883_883_476_483_184_4).abs() < 1e-12);
        assert!((yosida_gap_bound_l2(&p, 4.0) - 2.0 * b).abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(FlowRuleParams::new(1.0, 0.1, 1.0).is_err());
        assert!(FlowRuleParams::new(1.0, 0.1, 0.0).is_err());
        assert!(FlowRuleParams::new(1.0, -0.1, 0.5).is_err());
        assert!(FlowRuleParams::new(0.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn deriv_matrix_matches_apply() {
        let map = PointwiseMap::new(MapKind::Smooth, FlowRuleParams::new(0.3, 0.1, 0.2).unwrap());
        let t = tensor(3, &[0.4, -0.1, 0.2, 0.3, -0.2, 0.1]);
        let h = tensor(3, &[0.1, 0.2, -0.3, 0.05, 0.4, -0.1]);
        let m = map.deriv_matrix(&t, Mode::Jvp);
        assert!((m.apply(&h) - map.deriv(&t, &h, Mode::Jvp)).norm() < 1e-14);
        assert!(m.is_symmetric(1e-12));
    }

    fn fd_directional(f: impl Fn(&SymTensor2<f64>) -> SymTensor2<f64>, t: &SymTensor2<f64>, h: &SymTensor2<f64>, eps: f64) -> SymTensor2<f64> {
        (f(&(*t + h.scaled(eps))) - f(&(*t - h.scaled(eps)))).scaled(0.5 / eps)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(dim in 2usize..=3, a in prop::collection::vec(-3.0f64..3.0, 6),
                                                    b in prop::collection::vec(-3.0f64..3.0, 6), gamma in 0.1f64..2.0) {
            let x = tensor(dim, &a);
            let y = tensor(dim, &b);
            let px = project_admissible(&x, gamma);
            prop_assert!(px.deviator().norm() <= gamma * (1.0 + 1e-12));
            prop_assert!((project_admissible(&px, gamma) - px).norm() < 1e-12);
            let py = project_admissible(&y, gamma);
            prop_assert!((px - py).norm() <= (x - y).norm() * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn smooth_resolvent_monotone_lipschitz(dim in 2usize..=3, a in prop::collection::vec(-3.0f64..3.0, 6),
                                               b in prop::collection::vec(-3.0f64..3.0, 6), gamma in 0.1f64..2.0, s in 0.01f64..0.99) {
            let x = tensor(dim, &a);
            let y = tensor(dim, &b);
            let rx = smooth_resolvent(&x, gamma, s);
            let ry = smooth_resolvent(&y, gamma, s);
            let d = x - y;
            prop_assert!((rx - ry).dot(&d) >= -1e-12 * (1.0 + d.dot(&d)));
            prop_assert!((rx - ry).norm() <= d.norm() * (1.0 + 1e-10) + 1e-14);
        }

        #[test]
        fn smooth_resolvent_deriv_matches_fd_and_is_self_adjoint(dim in 2usize..=3, a in prop::collection::vec(-2.0f64..2.0, 6),
                                                                   h in prop::collection::vec(-1.0f64..1.0, 6),
                                                                   k in prop::collection::vec(-1.0f64..1.0, 6), s in 0.05f64..0.9) {
            let gamma = 0.5;
            let t = tensor(dim, &a);
            let hh = tensor(dim, &h);
            let kk = tensor(dim, &k);
            let d = smooth_resolvent_deriv(&t, &hh, gamma, s, Mode::Jvp);
            let fd = fd_directional(|x| smooth_resolvent(x, gamma, s), &t, &hh, 1e-6);
            prop_assert!((d - fd).norm() <= 1e-4 * (1.0 + d.norm()));
            let lhs = d.dot(&kk);
            let rhs = hh.dot(&smooth_resolvent_deriv(&t, &kk, gamma, s, Mode::Vjp));
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn yosida_gap_holds(dim in 2usize..=3, a in prop::collection::vec(-5.0f64..5.0, 6), gamma in 0.1f64..2.0,
                            lambda in 0.01f64..1.0, s in 0.01f64..0.99) {
            let p = FlowRuleParams::new(gamma, lambda, s).unwrap();
            let t = tensor(dim, &a);
            let a_s = (t - smooth_resolvent(&t, gamma, s)).scaled(1.0 / lambda);
            let gap = (yosida_flow(&t, &p) - a_s).norm();
            prop_assert!(gap <= yosida_gap_bound(&p) * (1.0 + 1e-10));
        }
    }
}
