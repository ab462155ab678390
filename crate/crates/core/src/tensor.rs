//! Symmetric second-order tensors, fourth-order tensors acting on them, and the
//! material model built from the elasticity and hardening tensors.
//!
//! Symmetric tensors are stored in Mandel form: diagonal entries first, then the
//! off-diagonal entries scaled by `√2`. With this scaling the Euclidean dot
//! product of the coefficient vectors equals the Frobenius product `σ:τ`, and a
//! fourth-order tensor with minor symmetries is just an `nv × nv` matrix.
//!
//! Orderings: `d = 1`: `(xx)`; `d = 2`: `(xx, yy, √2·xy)`;
//! `d = 3`: `(xx, yy, zz, √2·yz, √2·xz, √2·xy)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, DMat, Lu};
use crate::scalar::Real;

pub const MAX_NV: usize = 6;

/// Number of independent components of a symmetric `d × d` tensor.
pub const fn nv(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("spatial dimension {dim} not in 1..=3")))
    }
}

/// Matrix position `(i, j)` of each Mandel component.
fn component_index(dim: usize, k: usize) -> (usize, usize) {
    match (dim, k) {
        (_, k) if k < dim => (k, k),
        (2, 2) => (0, 1),
        (3, 3) => (1, 2),
        (3, 4) => (0, 2),
        (3, 5) => (0, 1),
        _ => unreachable!("component {k} out of range for dimension {dim}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor2<S> {
    dim: usize,
    c: [S; MAX_NV],
}

impl<S: Real> SymTensor2<S> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension {dim} not in 1..=3");
        Self { dim, c: [S::zero(); MAX_NV] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            t.c[k] = S::one();
        }
        t
    }

    /// Builds a tensor from Mandel coefficients.
    pub fn from_mandel(dim: usize, coeffs: &[S]) -> Result<Self> {
        check_dim(dim)?;
        if coeffs.len() != nv(dim) {
            return Err(Error::DimensionMismatch { expected: nv(dim), got: coeffs.len() });
        }
        let mut t = Self::zeros(dim);
        t.c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(t)
    }

    /// Builds a tensor from the symmetric part of a `d × d` matrix given by rows.
    pub fn from_matrix(dim: usize, m: &[[S; 3]; 3]) -> Self {
        let mut t = Self::zeros(dim);
        let r2 = S::lit(2.0).sqrt();
        for k in 0..nv(dim) {
            let (i, j) = component_index(dim, k);
            t.c[k] = if i == j { m[i][i] } else { r2 * (m[i][j] + m[j][i]) / S::lit(2.0) };
        }
        t
    }

    pub fn to_matrix(&self) -> [[S; 3]; 3] {
        let mut m = [[S::zero(); 3]; 3];
        let r2 = S::lit(2.0).sqrt();
        for k in 0..self.nv() {
            let (i, j) = component_index(self.dim, k);
            if i == j {
                m[i][i] = self.c[k];
            } else {
                m[i][j] = self.c[k] / r2;
                m[j][i] = self.c[k] / r2;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nv(&self) -> usize {
        nv(self.dim)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.c[..self.nv()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        let n = self.nv();
        &mut self.c[..n]
    }

    pub fn trace(&self) -> S {
        self.c[..self.dim].iter().copied().sum()
    }

    /// `t − (tr t / d)·I`.
    pub fn deviator(&self) -> Self {
        let mean = self.trace() / S::lit(self.dim as f64);
        let mut t = *self;
        for k in 0..self.dim {
            t.c[k] -= mean;
        }
        t
    }

    /// Frobenius product `σ:τ`.
    pub fn dot(&self, other: &Self) -> S {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice().iter().zip(other.as_slice()).fold(S::zero(), |s, (&a, &b)| s + a * b)
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, a: S) -> Self {
        let mut t = *self;
        for x in t.as_mut_slice() {
            *x *= a;
        }
        t
    }
}

impl<S: Real> Add for SymTensor2<S> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<S: Real> AddAssign for SymTensor2<S> {
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
    }
}

impl<S: Real> Sub for SymTensor2<S> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<S: Real> SubAssign for SymTensor2<S> {
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
    }
}

impl<S: Real> Mul<S> for SymTensor2<S> {
    type Output = Self;
    fn mul(self, a: S) -> Self {
        self.scaled(a)
    }
}

impl<S: Real> Neg for SymTensor2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scaled(-S::one())
    }
}

/// Linear map on symmetric tensors, stored as an `nv × nv` matrix in the Mandel basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank4Tensor<S> {
    dim: usize,
    m: [[S; MAX_NV]; MAX_NV],
}

impl<S: Real> Rank4Tensor<S> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension {dim} not in 1..=3");
        Self { dim, m: [[S::zero(); MAX_NV]; MAX_NV] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, S::one())
    }

    pub fn scaled_identity(dim: usize, a: S) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..nv(dim) {
            t.m[k][k] = a;
        }
        t
    }

    /// `T σ = 2μ σ + λ (tr σ) I`.
    pub fn isotropic(dim: usize, lame_lambda: S, mu: S) -> Self {
        let mut t = Self::scaled_identity(dim, S::lit(2.0) * mu);
        for i in 0..dim {
            for j in 0..dim {
                t.m[i][j] += lame_lambda;
            }
        }
        t
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..nv(dim) {
            for j in 0..nv(dim) {
                t.m[i][j] = f(i, j);
            }
        }
        t
    }

    /// Builds a tensor from the rows of its Mandel matrix.
    pub fn from_rows(dim: usize, rows: &[Vec<S>]) -> Result<Self> {
        check_dim(dim)?;
        let n = nv(dim);
        if rows.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_dmat(dim: usize, a: &DMat<S>) -> Self {
        Self::from_fn(dim, |i, j| a[(i, j)])
    }

    pub fn to_dmat(&self) -> DMat<S> {
        DMat::from_fn(self.nv(), self.nv(), |i, j| self.m[i][j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nv(&self) -> usize {
        nv(self.dim)
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.m[i][j]
    }

    pub fn apply(&self, t: &SymTensor2<S>) -> SymTensor2<S> {
        debug_assert_eq!(self.dim, t.dim());
        let n = self.nv();
        let mut out = SymTensor2::zeros(self.dim);
        let x = t.as_slice();
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            *o = (0..n).fold(S::zero(), |s, j| s + self.m[i][j] * x[j]);
        }
        out
    }

    pub fn apply_transpose(&self, t: &SymTensor2<S>) -> SymTensor2<S> {
        debug_assert_eq!(self.dim, t.dim());
        let n = self.nv();
        let mut out = SymTensor2::zeros(self.dim);
        let x = t.as_slice();
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            *o = (0..n).fold(S::zero(), |s, j| s + self.m[j][i] * x[j]);
        }
        out
    }

    /// Applies the tensor to Mandel coefficients stored in a slice.
    pub fn apply_slice(&self, x: &[S], out: &mut [S]) {
        let n = self.nv();
        for i in 0..n {
            out[i] = (0..n).fold(S::zero(), |s, j| s + self.m[i][j] * x[j]);
        }
    }

    pub fn apply_transpose_slice(&self, x: &[S], out: &mut [S]) {
        let n = self.nv();
        for i in 0..n {
            out[i] = (0..n).fold(S::zero(), |s, j| s + self.m[j][i] * x[j]);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.m[j][i])
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let n = self.nv();
        Self::from_fn(self.dim, |i, j| (0..n).fold(S::zero(), |s, k| s + self.m[i][k] * other.m[k][j]))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self.m[i][j] + other.m[i][j])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self.m[i][j] - other.m[i][j])
    }

    pub fn scaled(&self, a: S) -> Self {
        Self::from_fn(self.dim, |i, j| a * self.m[i][j])
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = Lu::factor(&self.to_dmat())?;
        Ok(Self::from_dmat(self.dim, &lu.inverse()))
    }

    pub fn max_asymmetry(&self) -> S {
        self.to_dmat().max_asymmetry()
    }

    pub fn is_symmetric(&self, rel_tol: S) -> bool {
        let scale = self.to_dmat().max_abs().max(S::min_positive_value());
        self.max_asymmetry() <= rel_tol * scale
    }

    /// Smallest eigenvalue of a symmetric tensor, i.e. the best constant `c` in `T σ:σ ≥ c|σ|²`.
    pub fn coercivity_constant(&self) -> Result<S> {
        if !self.is_symmetric(S::lit(1e-10)) {
            return Err(Error::NotSymmetric(self.max_asymmetry().as_f64()));
        }
        let (vals, _) = sym_eigen(&self.to_dmat());
        let min = vals[0];
        if min > S::zero() {
            Ok(min)
        } else {
            Err(Error::NotCoercive(min.as_f64()))
        }
    }
}

/// Material data with the derived coupling tensors
/// `D = B(C+B)⁻¹C` (hardening-softened stiffness) and `E = C(C+B)⁻¹`.
#[derive(Debug, Clone)]
pub struct MaterialModel<S> {
    pub dim: usize,
    /// Elasticity tensor.
    pub elasticity: Rank4Tensor<S>,
    /// Kinematic hardening tensor.
    pub hardening: Rank4Tensor<S>,
    pub density: S,
    /// Radius of the admissible deviatoric ball.
    pub yield_stress: S,
    pub stiffness_d: Rank4Tensor<S>,
    pub coupling_e: Rank4Tensor<S>,
    /// `C + B`.
    pub combined: Rank4Tensor<S>,
    /// `(C + B)⁻¹`.
    pub combined_inv: Rank4Tensor<S>,
}

/// Returns `(D, E)` for the given elasticity and hardening tensors.
pub fn derive_coupling_tensors<S: Real>(
    elasticity: &Rank4Tensor<S>,
    hardening: &Rank4Tensor<S>,
) -> Result<(Rank4Tensor<S>, Rank4Tensor<S>)> {
    if elasticity.dim() != hardening.dim() {
        return Err(Error::DimensionMismatch { expected: elasticity.dim(), got: hardening.dim() });
    }
    elasticity.coercivity_constant()?;
    hardening.coercivity_constant()?;
    let inv = elasticity.add(hardening).inverse()?;
    let e = elasticity.compose(&inv);
    let d = hardening.compose(&inv).compose(elasticity);
    Ok((d, e))
}

impl<S: Real> MaterialModel<S> {
    pub fn new(
        elasticity: Rank4Tensor<S>,
        hardening: Rank4Tensor<S>,
        density: S,
        yield_stress: S,
    ) -> Result<Self> {
        if !(density > S::zero()) {
            return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
        }
        if !(yield_stress > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "yield stress must be positive, got {yield_stress}"
            )));
        }
        let (d, e) = derive_coupling_tensors(&elasticity, &hardening)?;
        let combined = elasticity.add(&hardening);
        let combined_inv = combined.inverse()?;
        Ok(Self {
            dim: elasticity.dim(),
            elasticity,
            hardening,
            density,
            yield_stress,
            stiffness_d: d,
            coupling_e: e,
            combined,
            combined_inv,
        })
    }

    /// Isotropic elasticity (Lamé pair) with hardening `B = b·I`.
    pub fn isotropic(dim: usize, lame_lambda: S, shear_modulus: S, hardening_modulus: S, density: S, yield_stress: S) -> Result<Self> {
        check_dim(dim)?;
        Self::new(
            Rank4Tensor::isotropic(dim, lame_lambda, shear_modulus),
            Rank4Tensor::scaled_identity(dim, hardening_modulus),
            density,
            yield_stress,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_tensor(dim: usize, v: &[f64]) -> SymTensor2<f64> {
        SymTensor2::from_mandel(dim, &v[..nv(dim)]).unwrap()
    }

    #[test]
    fn mandel_dot_is_frobenius() {
        let m = [[1.0, 2.0, 3.0], [2.0, -1.0, 0.5], [3.0, 0.5, 4.0]];
        let n = [[0.5, -1.0, 2.0], [-1.0, 2.0, 1.0], [2.0, 1.0, -3.0]];
        let frob: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[i][j] * n[i][j]).sum();
        let a = SymTensor2::from_matrix(3, &m);
        let b = SymTensor2::from_matrix(3, &n);
        assert!((a.dot(&b) - frob).abs() < 1e-13);
        assert_eq!(a.to_matrix(), m);
    }

    #[test]
    fn deviator_one_dimensional_vanishes() {
        let t = SymTensor2::from_mandel(1, &[3.7]).unwrap();
        assert_eq!(t.deviator().norm(), 0.0);
    }

    #[test]
    fn isotropic_apply_matches_formula() {
        let c = Rank4Tensor::isotropic(2, 1.5f64, 0.7);
        let m = [[1.0, 0.3, 0.0], [0.3, -2.0, 0.0], [0.0, 0.0, 0.0]];
        let t = SymTensor2::from_matrix(2, &m);
        let out = c.apply(&t).to_matrix();
        let tr = -1.0;
        for i in 0..2 {
            for j in 0..2 {
                let expect = 2.0 * 0.7 * m[i][j] + if i == j { 1.5 * tr } else { 0.0 };
                assert!((out[i][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn combined_inverse_round_trip() {
        let mat = MaterialModel::isotropic(3, 1.2, 0.8, 0.4, 1.0, 0.1).unwrap();
        let id = mat.combined.compose(&mat.combined_inv);
        let err = id.sub(&Rank4Tensor::identity(3)).to_dmat().max_abs();
        assert!(err < 1e-12);
    }

    #[test]
    fn coupling_identities() {
        let mat = MaterialModel::isotropic(2, 2.0f64, 1.0, 0.5, 1.0, 0.1).unwrap();
        // D = C - C(C+B)^{-1}C
        let alt = mat.elasticity.sub(&mat.elasticity.compose(&mat.combined_inv).compose(&mat.elasticity));
        assert!(alt.sub(&mat.stiffness_d).to_dmat().max_abs() < 1e-12);
        assert!(mat.stiffness_d.is_symmetric(1e-12));
        assert!(mat.stiffness_d.coercivity_constant().unwrap() > 0.0);
        // shear block of B(C+B)⁻¹C with C = 2μ, B = b on the shear component
        let expect = 0.5 * 2.0 / (2.0 + 0.5);
        assert!((mat.stiffness_d.get(2, 2) - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_coercive_and_asymmetric() {
        let neg = Rank4Tensor::scaled_identity(2, -1.0);
        assert!(matches!(neg.coercivity_constant(), Err(Error::NotCoercive(_))));
        let mut rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        rows[0][1] = 0.5;
        let asym = Rank4Tensor::from_rows(2, &rows).unwrap();
        assert!(matches!(asym.coercivity_constant(), Err(Error::NotSymmetric(_))));
        assert!(matches!(
            Rank4Tensor::<f64>::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn generic_over_f32() {
        let mat = MaterialModel::<f32>::isotropic(2, 1.0, 1.0, 0.5, 1.0, 0.1).unwrap();
        let id = mat.combined.compose(&mat.combined_inv).sub(&Rank4Tensor::identity(2));
        assert!(id.to_dmat().max_abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn deviator_is_traceless_projection(dim in 1usize..=3, v in prop::collection::vec(-10.0f64..10.0, 6)) {
            let t = sample_tensor(dim, &v);
            let dev = t.deviator();
            prop_assert!(dev.trace().abs() < 1e-12);
            prop_assert!((dev.deviator() - dev).norm() < 1e-12);
            // orthogonal to the identity
            prop_assert!(dev.dot(&SymTensor2::identity(dim)).abs() < 1e-12);
        }

        #[test]
        fn transpose_is_adjoint(dim in 1usize..=3, a in prop::collection::vec(-2.0f64..2.0, 36),
                                x in prop::collection::vec(-2.0f64..2.0, 6), y in prop::collection::vec(-2.0f64..2.0, 6)) {
            let t = Rank4Tensor::from_fn(dim, |i, j| a[i * 6 + j]);
            let sx = sample_tensor(dim, &x);
            let sy = sample_tensor(dim, &y);
            prop_assert!((t.apply(&sx).dot(&sy) - sx.dot(&t.apply_transpose(&sy))).abs() < 1e-10);
        }

        #[test]
        fn derived_tensors_coercive(dim in 2usize..=3, l in 0.0f64..5.0, mu in 0.1f64..5.0, b in 0.05f64..5.0) {
            let mat = MaterialModel::isotropic(dim, l, mu, b, 1.0, 1.0).unwrap();
            prop_assert!(mat.stiffness_d.coercivity_constant().is_ok());
            prop_assert!(mat.combined_inv.coercivity_constant().is_ok());
        }
    }
}
