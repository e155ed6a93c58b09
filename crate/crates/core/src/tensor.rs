//! Fixed-size 3-vector / 3x3-tensor algebra and finite-strain kinematics.
//!
//! Everything here is a plain value type on `f64` components so that point-wise
//! constitutive evaluations stay allocation-free and trivially checkable by
//! finite differences. Second-order tensors are stored row-major: component
//! `(i, j)` lives at flat index `3*i + j`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Determinant magnitude below which a tensor is treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("tensor is singular (|det| = {det:e} <= {SINGULAR_DET_TOL:e})")]
    SingularTensor { det: f64 },
    #[error("deformation gradient has non-positive determinant (det = {det:e})")]
    NonPositiveJacobian { det: f64 },
}

/// A 3-vector value type.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3(pub [f64; 3]);

impl Vector3 {
    pub const ZERO: Vector3 = Vector3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3([x, y, z])
    }

    pub fn dot(&self, other: &Vector3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Outer product `self ⊗ other`.
    pub fn outer(&self, other: &Vector3) -> Tensor2 {
        let mut t = Tensor2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[3 * i + j] = self.0[i] * other.0[j];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for Vector3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, rhs: Vector3) -> Vector3 {
        Vector3([self[0] + rhs[0], self[1] + rhs[1], self[2] + rhs[2]])
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, rhs: Vector3) -> Vector3 {
        Vector3([self[0] - rhs[0], self[1] - rhs[1], self[2] - rhs[2]])
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        Vector3([self[0] * s, self[1] * s, self[2] * s])
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        self * -1.0
    }
}

impl AddAssign for Vector3 {
    fn add_assign(&mut self, rhs: Vector3) {
        for i in 0..3 {
            self.0[i] += rhs.0[i];
        }
    }
}

/// A second-order tensor on R^3, row-major storage (`(i, j)` at `3*i + j`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor2(pub [f64; 9]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([0.0; 9]);
    pub const IDENTITY: Tensor2 =
        Tensor2([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Tensor2([a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c])
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = Tensor2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[3 * i + j] = f(i, j);
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[3 * i + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[3 * i + j] = v;
    }

    pub fn transpose(&self) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.get(j, i))
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[4] + self.0[8]
    }

    /// Double contraction `self : other`.
    pub fn double_dot(&self, other: &Tensor2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    /// Symmetric part `(T + T^t)/2`.
    pub fn sym(&self) -> Tensor2 {
        Tensor2::from_fn(|i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// Deviatoric part `T - tr(T)/3 I`.
    pub fn dev(&self) -> Tensor2 {
        let m = self.trace() / 3.0;
        let mut t = *self;
        t.0[0] -= m;
        t.0[4] -= m;
        t.0[8] -= m;
        t
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &Vector3) -> Vector3 {
        let mut out = Vector3::ZERO;
        for i in 0..3 {
            out.0[i] =
                self.get(i, 0) * v[0] + self.get(i, 1) * v[1] + self.get(i, 2) * v[2];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Tensor2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[3 * i + j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[3 * i + j]
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: Tensor2) -> Tensor2 {
        let mut t = self;
        for i in 0..9 {
            t.0[i] += rhs.0[i];
        }
        t
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: Tensor2) -> Tensor2 {
        let mut t = self;
        for i in 0..9 {
            t.0[i] -= rhs.0[i];
        }
        t
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        let mut t = self;
        for i in 0..9 {
            t.0[i] *= s;
        }
        t
    }
}

impl Mul<Tensor2> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, rhs: Tensor2) -> Tensor2 {
        let mut t = Tensor2::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.get(i, k) * rhs.get(k, j);
                }
                t.set(i, j, s);
            }
        }
        t
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        for i in 0..9 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, rhs: Tensor2) {
        for i in 0..9 {
            self.0[i] -= rhs.0[i];
        }
    }
}

/// Determinant of a 3x3 tensor.
pub fn det3(t: &Tensor2) -> f64 {
    let m = &t.0;
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Inverse of a 3x3 tensor via the adjugate.
///
/// Fails with [`TensorError::SingularTensor`] when `|det| <= 1e-14`.
pub fn inv3(t: &Tensor2) -> Result<Tensor2, TensorError> {
    let det = det3(t);
    if det.abs() <= SINGULAR_DET_TOL {
        return Err(TensorError::SingularTensor { det });
    }
    let m = &t.0;
    let inv_det = 1.0 / det;
    let mut o = [0.0; 9];
    o[0] = (m[4] * m[8] - m[5] * m[7]) * inv_det;
    o[1] = (m[2] * m[7] - m[1] * m[8]) * inv_det;
    o[2] = (m[1] * m[5] - m[2] * m[4]) * inv_det;
    o[3] = (m[5] * m[6] - m[3] * m[8]) * inv_det;
    o[4] = (m[0] * m[8] - m[2] * m[6]) * inv_det;
    o[5] = (m[2] * m[3] - m[0] * m[5]) * inv_det;
    o[6] = (m[3] * m[7] - m[4] * m[6]) * inv_det;
    o[7] = (m[1] * m[6] - m[0] * m[7]) * inv_det;
    o[8] = (m[0] * m[4] - m[1] * m[3]) * inv_det;
    Ok(Tensor2(o))
}

/// Deformation measures derived from one deformation gradient.
///
/// Carries the volume-preserving (distortional) part of the motion:
/// `fbar = J^(-1/3) F`, `cbar = fbar^t fbar`, with `det(fbar) = 1` and the
/// first two invariants of `cbar`.
#[derive(Debug, Clone, Copy)]
pub struct DeformationState {
    pub f: Tensor2,
    pub j: f64,
    pub fbar: Tensor2,
    pub cbar: Tensor2,
    pub cbar_inv: Tensor2,
    pub i1bar: f64,
    pub i2bar: f64,
}

impl DeformationState {
    /// Distortional left Cauchy-Green tensor `fbar fbar^t`.
    pub fn bbar(&self) -> Tensor2 {
        self.fbar * self.fbar.transpose()
    }
}

/// Builds a [`DeformationState`] from a deformation gradient.
///
/// Fails with [`TensorError::NonPositiveJacobian`] when `det(F) <= 0`.
pub fn kinematics(f: &Tensor2) -> Result<DeformationState, TensorError> {
    let j = det3(f);
    if j <= 0.0 {
        return Err(TensorError::NonPositiveJacobian { det: j });
    }
    let scale = j.cbrt().recip();
    let fbar = *f * scale;
    let cbar = fbar.transpose() * fbar;
    // cbar is unimodular SPD, so the adjugate inverse is well conditioned.
    let cbar_inv = inv3(&cbar)?;
    let i1bar = cbar.trace();
    let c2 = cbar * cbar;
    let i2bar = 0.5 * (i1bar * i1bar - c2.trace());
    Ok(DeformationState {
        f: *f,
        j,
        fbar,
        cbar,
        cbar_inv,
        i1bar,
        i2bar,
    })
}

/// Push-forward of a referential field-intensity vector: `h = F^(-t) H`.
pub fn push_forward_h(f: &Tensor2, h_ref: &Vector3) -> Result<Vector3, TensorError> {
    let det = det3(f);
    if det <= 0.0 {
        return Err(TensorError::NonPositiveJacobian { det });
    }
    Ok(inv3(f)?.transpose().apply(h_ref))
}

/// Pull-back companion of [`push_forward_h`]: `H = F^t h`.
pub fn pull_back_h(f: &Tensor2, h_cur: &Vector3) -> Vector3 {
    f.transpose().apply(h_cur)
}

/// Push-forward of a referential flux-density vector: `b = (1/J) F B`.
pub fn push_forward_b(f: &Tensor2, b_ref: &Vector3) -> Result<Vector3, TensorError> {
    let det = det3(f);
    if det <= 0.0 {
        return Err(TensorError::NonPositiveJacobian { det });
    }
    Ok(f.apply(b_ref) * det.recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn det3_identity_and_diag() {
        assert_eq!(det3(&Tensor2::IDENTITY), 1.0);
        assert_eq!(det3(&Tensor2::diag(2.0, 3.0, 4.0)), 24.0);
    }

    #[test]
    fn det3_simple_shear_is_volume_preserving() {
        let mut t = Tensor2::IDENTITY;
        t.set(0, 1, 0.7); // I + 0.7 e1 (x) e2
        assert_eq!(det3(&t), 1.0);
    }

    #[test]
    fn inv3_identity_and_diag() {
        assert_eq!(inv3(&Tensor2::IDENTITY).unwrap(), Tensor2::IDENTITY);
        let inv = inv3(&Tensor2::diag(2.0, 4.0, 5.0)).unwrap();
        assert_eq!(inv, Tensor2::diag(0.5, 0.25, 0.2));
    }

    #[test]
    fn inv3_rejects_singular() {
        let t = Tensor2::diag(1.0, 1.0, 0.0);
        assert!(matches!(inv3(&t), Err(TensorError::SingularTensor { .. })));
    }

    #[test]
    fn kinematics_identity() {
        let s = kinematics(&Tensor2::IDENTITY).unwrap();
        assert_eq!(s.j, 1.0);
        assert_eq!(s.cbar, Tensor2::IDENTITY);
        assert_eq!(s.i1bar, 3.0);
        assert_eq!(s.i2bar, 3.0);
    }

    #[test]
    fn kinematics_isochoric_uniaxial() {
        let l = 2.0_f64;
        let t = 1.0 / l.sqrt();
        let s = kinematics(&Tensor2::diag(l, t, t)).unwrap();
        assert_relative_eq!(s.j, 1.0, max_relative = 1e-14);
        // i1bar = l^2 + 2/l = 4 + 1 = 5
        assert_relative_eq!(s.i1bar, 5.0, max_relative = 1e-14);
    }

    #[test]
    fn kinematics_pure_dilation_leaves_cbar_identity() {
        let s = kinematics(&(Tensor2::IDENTITY * 2.0)).unwrap();
        assert_relative_eq!(s.j, 8.0, max_relative = 1e-14);
        assert!(s.fbar.max_abs_diff(&Tensor2::IDENTITY) < 1e-14);
        assert_relative_eq!(s.i1bar, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn kinematics_rejects_inverted() {
        let err = kinematics(&Tensor2::diag(-1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, TensorError::NonPositiveJacobian { .. }));
    }

    #[test]
    fn push_forward_h_cases() {
        let h = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(push_forward_h(&Tensor2::IDENTITY, &h).unwrap(), h);
        let f = Tensor2::diag(2.0, 1.0, 1.0);
        let out = push_forward_h(&f, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(out, Vector3::new(0.5, 0.0, 0.0));
    }

    #[test]
    fn push_forward_b_cases() {
        let b = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(push_forward_b(&Tensor2::IDENTITY, &b).unwrap(), b);
        let out = push_forward_b(&(Tensor2::IDENTITY * 2.0), &Vector3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert_relative_eq!(out[0], 0.25, max_relative = 1e-14);
    }

    /// Strategy for well-conditioned deformation gradients (det > 0).
    fn arb_def_grad() -> impl Strategy<Value = Tensor2> {
        proptest::array::uniform9(-0.35..0.35f64).prop_map(|p| {
            let mut f = Tensor2::IDENTITY;
            for i in 0..9 {
                f.0[i] += p[i];
            }
            f
        })
    }

    proptest! {
        #[test]
        fn fbar_is_unimodular(f in arb_def_grad()) {
            let s = kinematics(&f).unwrap();
            prop_assert!((det3(&s.fbar) - 1.0).abs() < 1e-12);
            prop_assert!(s.i1bar >= 3.0 - 1e-12);
        }

        #[test]
        fn cbar_is_dilation_invariant(f in arb_def_grad(), c in 0.2..4.0f64) {
            let s1 = kinematics(&f).unwrap();
            let s2 = kinematics(&(f * c)).unwrap();
            prop_assert!(s1.cbar.max_abs_diff(&s2.cbar) < 1e-12);
        }

        #[test]
        fn inv_det_reciprocal(f in arb_def_grad()) {
            let inv = inv3(&f).unwrap();
            let lhs = det3(&inv);
            let rhs = 1.0 / det3(&f);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
            // multiply-back oracle
            let prod = f * inv;
            prop_assert!(prod.max_abs_diff(&Tensor2::IDENTITY) < 1e-12);
        }

        #[test]
        fn h_map_round_trips(f in arb_def_grad(), hx in -3.0..3.0f64, hy in -3.0..3.0f64, hz in -3.0..3.0f64) {
            let h = Vector3::new(hx, hy, hz);
            let fwd = push_forward_h(&f, &h).unwrap();
            let back = pull_back_h(&f, &fwd);
            prop_assert!((back - h).norm() < 1e-12 * (1.0 + h.norm()));
        }
    }
}
