//! Complex 2×2 linear algebra on the polarization space.
//!
//! States are Jones vectors in the {|H⟩, |V⟩} basis and operators are 2×2
//! complex Jones matrices. The module provides the polar decomposition
//! `A = U·R` (via a closed-form 2×2 SVD), expectation values, weak values,
//! and the chain that rewrites `⟨ψ|A|ψ⟩` as the weak value of `R` between
//! `ψ` and `φ = U†ψ` times the overlap `⟨φ|ψ⟩`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Scalar type used throughout: a double-precision complex number.
pub type ComplexScalar = Complex64;

/// Default tolerance for the matrix predicates.
pub const PREDICATE_TOL: f64 = 1e-10;
/// `|⟨φ|ψ⟩|` below this is treated as orthogonal pre/post-selection.
pub const ORTHOGONALITY_CUTOFF: f64 = 1e-12;
/// Singular values below this are treated as zero in the polar decomposition.
pub const SINGULAR_CUTOFF: f64 = 1e-12;
/// Tolerance on `‖ψ‖² = 1` accepted by the state-consuming operations.
pub const NORMALIZATION_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum JonesError {
    #[error("state is not normalized: |h|²+|v|² = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },
    #[error("pre- and post-selected states are orthogonal (|⟨φ|ψ⟩| = {overlap:e})")]
    OrthogonalSelection { overlap: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("non-finite value in input")]
    NonFinite,
}

/// Polarization state: amplitudes on |H⟩ and |V⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub h: Complex64,
    pub v: Complex64,
}

impl JonesVector {
    pub const fn new(h: Complex64, v: Complex64) -> Self {
        Self { h, v }
    }

    pub fn from_real(h: f64, v: f64) -> Self {
        Self::new(Complex64::new(h, 0.0), Complex64::new(v, 0.0))
    }

    /// |H⟩
    pub const fn horizontal() -> Self {
        Self::new(ONE, ZERO)
    }

    /// |V⟩
    pub const fn vertical() -> Self {
        Self::new(ZERO, ONE)
    }

    /// |+⟩ = (|H⟩+|V⟩)/√2
    pub fn diagonal() -> Self {
        Self::from_real(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
    }

    /// |−⟩ = (|H⟩−|V⟩)/√2
    pub fn antidiagonal() -> Self {
        Self::from_real(std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2)
    }

    /// (|H⟩+i|V⟩)/√2
    pub fn circular_right() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(s, 0.0), Complex64::new(0.0, s))
    }

    /// (|H⟩−i|V⟩)/√2
    pub fn circular_left() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(s, 0.0), Complex64::new(0.0, -s))
    }

    /// Linear polarization at `angle` radians from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self::from_real(angle.cos(), angle.sin())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.v.is_finite()
    }

    /// Returns `self / ‖self‖`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            None
        } else {
            Some(self.scale(Complex64::new(1.0 / n, 0.0)))
        }
    }

    /// Inner product ⟨self|other⟩ (conjugate-linear in `self`).
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.h * c, self.v * c)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.h.conj(), self.v.conj())
    }

    /// Unit vector orthogonal to `self`, `(−v*, h*)`. For a unit input the
    /// pair `[self | perp]` has determinant exactly `|h|²+|v|²`.
    pub fn perp(&self) -> Self {
        Self::new(-self.v.conj(), self.h.conj())
    }

    /// Rephase so the first component above `eps` in magnitude is real and
    /// positive.
    pub fn with_canonical_phase(&self, eps: f64) -> Self {
        let lead = if self.h.norm() > eps { self.h } else { self.v };
        let n = lead.norm();
        if n == 0.0 {
            return *self;
        }
        self.scale(lead.conj() / n)
    }

    pub(crate) fn require_normalized(&self) -> Result<(), JonesError> {
        if !self.is_finite() {
            return Err(JonesError::NonFinite);
        }
        if !self.is_normalized(NORMALIZATION_TOL) {
            return Err(JonesError::NotNormalized { norm_sqr: self.norm_sqr() });
        }
        Ok(())
    }
}

impl Add for JonesVector {
    type Output = JonesVector;
    fn add(self, rhs: JonesVector) -> JonesVector {
        JonesVector::new(self.h + rhs.h, self.v + rhs.v)
    }
}

impl Sub for JonesVector {
    type Output = JonesVector;
    fn sub(self, rhs: JonesVector) -> JonesVector {
        JonesVector::new(self.h - rhs.h, self.v - rhs.v)
    }
}

impl fmt::Display for JonesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.h, self.v)
    }
}

/// 2×2 complex operator on polarization, row-major in the {|H⟩,|V⟩} basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl JonesMatrix {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self { m: [[m00, m01], [m10, m11]] }
    }

    pub fn from_real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self::new(
            Complex64::new(m00, 0.0),
            Complex64::new(m01, 0.0),
            Complex64::new(m10, 0.0),
            Complex64::new(m11, 0.0),
        )
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Self::new(a, ZERO, ZERO, d)
    }

    pub fn pauli_x() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn pauli_y() -> Self {
        Self::new(ZERO, -Complex64::i(), Complex64::i(), ZERO)
    }

    pub fn pauli_z() -> Self {
        Self::new(ONE, ZERO, ZERO, -ONE)
    }

    /// Π_H = |H⟩⟨H|
    pub fn proj_h() -> Self {
        Self::new(ONE, ZERO, ZERO, ZERO)
    }

    /// Π_V = |V⟩⟨V|
    pub fn proj_v() -> Self {
        Self::new(ZERO, ZERO, ZERO, ONE)
    }

    /// The spin lowering operator ½(σx − iσy) = [[0,0],[1,0]].
    pub fn lowering() -> Self {
        Self::new(ZERO, ZERO, ONE, ZERO)
    }

    /// |a⟩⟨b|
    pub fn outer(a: &JonesVector, b: &JonesVector) -> Self {
        Self::new(
            a.h * b.h.conj(),
            a.h * b.v.conj(),
            a.v * b.h.conj(),
            a.v * b.v.conj(),
        )
    }

    /// Matrix whose columns are `c0` and `c1`.
    pub fn from_columns(c0: &JonesVector, c1: &JonesVector) -> Self {
        Self::new(c0.h, c1.h, c0.v, c1.v)
    }

    pub fn column(&self, j: usize) -> JonesVector {
        JonesVector::new(self.m[0][j], self.m[1][j])
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let m = &self.m;
        Self::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry-wise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.is_finite())
    }

    pub fn apply(&self, x: &JonesVector) -> JonesVector {
        JonesVector::new(
            self.m[0][0] * x.h + self.m[0][1] * x.v,
            self.m[1][0] * x.h + self.m[1][1] * x.v,
        )
    }

    pub fn approx_eq(&self, other: &JonesMatrix, tol: f64) -> bool {
        (*self - *other).max_abs() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.approx_eq(&self.adjoint(), tol)
    }

    /// `M†M = I` entry-wise within `tol` and `||det M| − 1| ≤ tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).approx_eq(&Self::identity(), tol) && (self.det().norm() - 1.0).abs() <= tol
    }

    /// Hermitian within `tol` with both eigenvalues ≥ −tol.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.hermitian_eigenvalues().0 >= -tol
    }

    /// Eigenvalues (ascending) of the Hermitian part `(M + M†)/2`.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let p = self.m[0][0].re;
        let s = self.m[1][1].re;
        let q = (self.m[0][1] + self.m[1][0].conj()) * 0.5;
        let mean = 0.5 * (p + s);
        let radius = (0.5 * (p - s)).hypot(q.norm());
        (mean - radius, mean + radius)
    }
}

impl Default for JonesMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;
    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        matmul(&self, &rhs)
    }
}

impl Mul<JonesVector> for JonesMatrix {
    type Output = JonesVector;
    fn mul(self, rhs: JonesVector) -> JonesVector {
        self.apply(&rhs)
    }
}

impl Add for JonesMatrix {
    type Output = JonesMatrix;
    fn add(self, rhs: JonesMatrix) -> JonesMatrix {
        let (a, b) = (self.m, rhs.m);
        JonesMatrix::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for JonesMatrix {
    type Output = JonesMatrix;
    fn sub(self, rhs: JonesMatrix) -> JonesMatrix {
        self + (-rhs)
    }
}

impl Neg for JonesMatrix {
    type Output = JonesMatrix;
    fn neg(self) -> JonesMatrix {
        self.scale(-ONE)
    }
}

impl fmt::Display for JonesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1])
    }
}

// JSON wire format: matrices are [[re,im]×4] row-major, vectors [[re,im]×2].

impl Serialize for JonesMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let flat: [[f64; 2]; 4] = self.entries().map(|z| [z.re, z.im]);
        flat.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JonesMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let flat = <[[f64; 2]; 4]>::deserialize(deserializer)?;
        if flat.iter().flatten().any(|x| !x.is_finite()) {
            return Err(D::Error::custom("matrix entries must be finite"));
        }
        let c = flat.map(|[re, im]| Complex64::new(re, im));
        Ok(JonesMatrix::new(c[0], c[1], c[2], c[3]))
    }
}

impl Serialize for JonesVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [[self.h.re, self.h.im], [self.v.re, self.v.im]].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JonesVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [[hr, hi], [vr, vi]] = <[[f64; 2]; 2]>::deserialize(deserializer)?;
        let v = JonesVector::new(Complex64::new(hr, hi), Complex64::new(vr, vi));
        if !v.is_finite() {
            return Err(D::Error::custom("vector entries must be finite"));
        }
        Ok(v)
    }
}

/// Exact 2×2 complex product `a·b`.
pub fn matmul(a: &JonesMatrix, b: &JonesMatrix) -> JonesMatrix {
    let (a, b) = (&a.m, &b.m);
    JonesMatrix::new(
        a[0][0] * b[0][0] + a[0][1] * b[1][0],
        a[0][0] * b[0][1] + a[0][1] * b[1][1],
        a[1][0] * b[0][0] + a[1][1] * b[1][0],
        a[1][0] * b[0][1] + a[1][1] * b[1][1],
    )
}

/// ⟨ψ|M|ψ⟩ for a normalized ψ.
pub fn expectation(m: &JonesMatrix, psi: &JonesVector) -> Result<Complex64, JonesError> {
    psi.require_normalized()?;
    Ok(psi.inner(&m.apply(psi)))
}

/// Principal square root of a PSD matrix.
///
/// Uses the 2×2 identity `√M = (M + √det·I) / √(tr M + 2√det)`, with the
/// input first symmetrized to its Hermitian part.
pub fn matrix_sqrt_psd(m: &JonesMatrix) -> Result<JonesMatrix, JonesError> {
    if !m.is_finite() {
        return Err(JonesError::NonFinite);
    }
    if !m.is_hermitian(1e-9) {
        return Err(JonesError::NotHermitian);
    }
    let (lo, hi) = m.hermitian_eigenvalues();
    if lo < -1e-9 {
        return Err(JonesError::NotPsd { min_eigenvalue: lo });
    }
    let (lo, hi) = (lo.max(0.0), hi.max(0.0));
    let h = (*m + m.adjoint()).scale(Complex64::new(0.5, 0.0));
    let root_det = (lo * hi).sqrt();
    let denom = (lo + hi + 2.0 * root_det).sqrt();
    if denom == 0.0 {
        return Ok(JonesMatrix::zero());
    }
    // tr and det taken from the clamped spectrum so tiny negative rounding
    // in a rank-1 input cannot leak into the root.
    let shifted = JonesMatrix::new(
        Complex64::new(h.m[0][0].re + root_det, 0.0),
        h.m[0][1],
        h.m[1][0],
        Complex64::new(h.m[1][1].re + root_det, 0.0),
    );
    let scaled = shifted.scale(Complex64::new(1.0 / denom, 0.0));
    Ok(scaled)
}

/// Result of `A = U·R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarDecomposition {
    /// Unitary factor.
    pub u: JonesMatrix,
    /// Hermitian PSD factor √(A†A).
    pub r: JonesMatrix,
    /// ‖A − U·R‖_F
    pub residual: f64,
    pub singular_values: [f64; 2],
}

/// Right polar decomposition `A = U·R` with `R = √(A†A)`.
///
/// Computed from a closed-form SVD `A = W Σ V†`: `R = V Σ V†`, `U = W V†`.
/// When a singular value falls below [`SINGULAR_CUTOFF`] the free columns of
/// `V` and `W` are completed by orthonormality and rephased so their first
/// nonzero component is real and positive. For `A = [[0,0],[1,0]]` this
/// yields `U = σx`, `R = Π_H`.
pub fn polar_decompose(a: &JonesMatrix) -> PolarDecomposition {
    let (sigma_hi, sigma_lo) = singular_values(a);
    let ata = a.adjoint() * *a;

    let (u, r) = if sigma_hi <= SINGULAR_CUTOFF {
        (JonesMatrix::identity(), JonesMatrix::zero())
    } else {
        let v1 = top_eigenvector(&ata, sigma_hi * sigma_hi).with_canonical_phase(SINGULAR_CUTOFF);
        let v2 = v1.perp().with_canonical_phase(SINGULAR_CUTOFF);
        let w1 = a
            .apply(&v1)
            .normalized()
            .unwrap_or_else(JonesVector::horizontal);
        let w2_base = w1.perp();
        let w2 = if sigma_lo > SINGULAR_CUTOFF {
            // Phase of w2 follows A·v2 = σ₂·w2.
            let proj = w2_base.inner(&a.apply(&v2));
            let n = proj.norm();
            if n > 0.0 {
                w2_base.scale(proj / n)
            } else {
                w2_base.with_canonical_phase(SINGULAR_CUTOFF)
            }
        } else {
            w2_base.with_canonical_phase(SINGULAR_CUTOFF)
        };
        let u = JonesMatrix::outer(&w1, &v1) + JonesMatrix::outer(&w2, &v2);
        let r = JonesMatrix::outer(&v1, &v1).scale(Complex64::new(sigma_hi, 0.0))
            + JonesMatrix::outer(&v2, &v2).scale(Complex64::new(sigma_lo, 0.0));
        // R is Hermitian by construction; remove rounding asymmetry.
        let r = JonesMatrix::new(
            Complex64::new(r.m[0][0].re, 0.0),
            r.m[0][1],
            r.m[0][1].conj(),
            Complex64::new(r.m[1][1].re, 0.0),
        );
        (u, r)
    };
    let residual = (*a - u * r).frobenius_norm();
    PolarDecomposition { u, r, residual, singular_values: [sigma_hi, sigma_lo] }
}

/// Singular values `(σ₁ ≥ σ₂)`, with σ₂ taken as `|det A|/σ₁` for accuracy
/// when A is nearly singular.
pub fn singular_values(a: &JonesMatrix) -> (f64, f64) {
    let ata = a.adjoint() * *a;
    let (p, s, q) = (ata.m[0][0].re, ata.m[1][1].re, ata.m[0][1]);
    let f2 = p + s;
    let det = a.det().norm();
    // Eigenvalue gap of A†A, free of the cancellation in F⁴ − 4|det|².
    let disc = ((p - s).powi(2) + 4.0 * q.norm_sqr()).sqrt();
    let s1 = (0.5 * (f2 + disc)).sqrt();
    if s1 == 0.0 {
        return (0.0, 0.0);
    }
    let s2 = (det / s1).min(s1);
    (s1, s2)
}

/// Unit eigenvector of the Hermitian `h` for its largest eigenvalue `lambda`.
fn top_eigenvector(h: &JonesMatrix, lambda: f64) -> JonesVector {
    let p = h.m[0][0].re;
    let s = h.m[1][1].re;
    let q = h.m[0][1];
    // Rows of (h − λI) annihilate the eigenvector; take the better-conditioned candidate.
    let c1 = JonesVector::new(q, Complex64::new(lambda - p, 0.0));
    let c2 = JonesVector::new(Complex64::new(lambda - s, 0.0), q.conj());
    let best = if c1.norm_sqr() >= c2.norm_sqr() { c1 } else { c2 };
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    if best.norm() <= 1e-14 * scale {
        // Degenerate spectrum: every vector is an eigenvector.
        JonesVector::horizontal()
    } else {
        best.normalized().unwrap_or_else(JonesVector::horizontal)
    }
}

/// Weak value ⟨φ|R|ψ⟩ / ⟨φ|ψ⟩.
pub fn weak_value(r: &JonesMatrix, psi: &JonesVector, phi: &JonesVector) -> Result<Complex64, JonesError> {
    psi.require_normalized()?;
    phi.require_normalized()?;
    let overlap = phi.inner(psi);
    if overlap.norm() < ORTHOGONALITY_CUTOFF {
        return Err(JonesError::OrthogonalSelection { overlap: overlap.norm() });
    }
    Ok(phi.inner(&r.apply(psi)) / overlap)
}

/// Every intermediate of `z = ⟨R⟩_w · ⟨φ|ψ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValueChain {
    pub decomposition: PolarDecomposition,
    /// Post-selection φ = U†ψ.
    pub phi: JonesVector,
    pub weak_value: Complex64,
    /// ⟨φ|ψ⟩ = ⟨ψ|U|ψ⟩
    pub overlap: Complex64,
    pub z: Complex64,
}

/// Polar-decompose `a`, post-select on `φ = U†ψ` and rebuild `⟨ψ|A|ψ⟩`
/// from the weak value of `R`.
pub fn weak_value_chain(a: &JonesMatrix, psi: &JonesVector) -> Result<WeakValueChain, JonesError> {
    psi.require_normalized()?;
    if !a.is_finite() {
        return Err(JonesError::NonFinite);
    }
    let decomposition = polar_decompose(a);
    let phi = decomposition.u.adjoint().apply(psi);
    // U is unitary to rounding; renormalize so the tolerance check is about ψ only.
    let phi = phi.normalized().unwrap_or(phi);
    let weak_value = weak_value(&decomposition.r, psi, &phi)?;
    let overlap = phi.inner(psi);
    Ok(WeakValueChain { decomposition, phi, weak_value, overlap, z: weak_value * overlap })
}

/// `⟨ψ|A|ψ⟩` obtained through the weak value of the positive part of `A`.
pub fn nonhermitian_expectation_via_weak(a: &JonesMatrix, psi: &JonesVector) -> Result<Complex64, JonesError> {
    weak_value_chain(a, psi).map(|c| c.z)
}

/// Rotation by `theta` in the H/V plane.
fn rotation(theta: f64) -> JonesMatrix {
    let (s, c) = theta.sin_cos();
    JonesMatrix::from_real(c, -s, s, c)
}

/// Linear retarder with fast axis at `theta` and retardance `delta`:
/// `Rot(θ)·diag(1, e^{iδ})·Rot(−θ)`.
pub fn retarder(theta: f64, delta: f64) -> JonesMatrix {
    let core = JonesMatrix::diag(ONE, Complex64::from_polar(1.0, delta));
    rotation(theta) * core * rotation(-theta)
}

/// Half-wave plate, fast axis at `theta`: [[cos2θ, sin2θ],[sin2θ, −cos2θ]].
pub fn hwp(theta: f64) -> JonesMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    JonesMatrix::from_real(c, s, s, -c)
}

/// Quarter-wave plate, fast axis at `theta`.
pub fn qwp(theta: f64) -> JonesMatrix {
    retarder(theta, std::f64::consts::FRAC_PI_2)
}

/// Ideal linear polarizer with transmission axis at `theta`.
pub fn polarizer(theta: f64) -> JonesMatrix {
    let (s, c) = theta.sin_cos();
    JonesMatrix::from_real(c * c, c * s, c * s, s * s)
}

/// `hwp(θ)·Π_H = [[cos2θ, 0],[sin2θ, 0]]`.
pub fn class_operator(theta: f64) -> JonesMatrix {
    hwp(theta) * JonesMatrix::proj_h()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lowering_is_sigma_x_times_proj_h() {
        let prod = JonesMatrix::pauli_x() * JonesMatrix::proj_h();
        assert_eq!(prod, JonesMatrix::lowering());
    }

    #[test]
    fn lowering_from_pauli_matrices() {
        let half = c(0.5, 0.0);
        let lowered = (JonesMatrix::pauli_x() - JonesMatrix::pauli_y().scale(Complex64::i())).scale(half);
        assert!(lowered.approx_eq(&JonesMatrix::lowering(), 0.0));
    }

    #[test]
    fn identity_is_neutral() {
        let m = JonesMatrix::new(c(1.0, 2.0), c(-0.5, 0.1), c(3.0, 0.0), c(0.0, -1.0));
        assert_eq!(JonesMatrix::identity() * m, m);
        assert_eq!(m * JonesMatrix::identity(), m);
    }

    #[test]
    fn expectation_of_proj_h_on_plus() {
        let z = expectation(&JonesMatrix::proj_h(), &JonesVector::diagonal()).unwrap();
        assert!((z - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expectation_rejects_unnormalized() {
        let err = expectation(&JonesMatrix::identity(), &JonesVector::from_real(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, JonesError::NotNormalized { .. }));
    }

    #[test]
    fn expectation_of_class_operator_on_grid() {
        let psi = JonesVector::diagonal();
        for deg in 0..=360 {
            let t = (deg as f64).to_radians();
            let z = expectation(&class_operator(t), &psi).unwrap();
            let expected = 0.5 * ((2.0 * t).cos() + (2.0 * t).sin());
            assert!((z - c(expected, 0.0)).norm() < 1e-14, "θ={deg}");
        }
    }

    #[test]
    fn sqrt_of_diagonal_psd() {
        let r = matrix_sqrt_psd(&JonesMatrix::proj_h()).unwrap();
        assert!(r.approx_eq(&JonesMatrix::proj_h(), 1e-15));
        let r = matrix_sqrt_psd(&JonesMatrix::from_real(4.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(r.approx_eq(&JonesMatrix::from_real(2.0, 0.0, 0.0, 1.0), 1e-15));
        assert_eq!(matrix_sqrt_psd(&JonesMatrix::zero()).unwrap(), JonesMatrix::zero());
    }

    #[test]
    fn sqrt_rejects_indefinite_and_non_hermitian() {
        let e = matrix_sqrt_psd(&JonesMatrix::from_real(1.0, 0.0, 0.0, -1.0)).unwrap_err();
        assert!(matches!(e, JonesError::NotPsd { .. }));
        assert_eq!(matrix_sqrt_psd(&JonesMatrix::lowering()).unwrap_err(), JonesError::NotHermitian);
    }

    #[test]
    fn polar_of_lowering_operator() {
        let pd = polar_decompose(&JonesMatrix::lowering());
        assert!(pd.u.approx_eq(&JonesMatrix::pauli_x(), 1e-12), "{}", pd.u);
        assert!(pd.r.approx_eq(&JonesMatrix::proj_h(), 1e-12), "{}", pd.r);
        assert!(pd.residual < 1e-15);
    }

    #[test]
    fn polar_of_unitary_is_trivial() {
        for w in [hwp(0.3), qwp(1.1), retarder(0.2, 0.7), JonesMatrix::pauli_y(), JonesMatrix::identity()] {
            let pd = polar_decompose(&w);
            assert!(pd.u.approx_eq(&w, 1e-12), "{w} vs {}", pd.u);
            assert!(pd.r.approx_eq(&JonesMatrix::identity(), 1e-12));
        }
    }

    #[test]
    fn polar_of_zero_and_rank_one() {
        let pd = polar_decompose(&JonesMatrix::zero());
        assert_eq!(pd.r, JonesMatrix::zero());
        assert!(pd.u.is_unitary(1e-12));

        let a = JonesMatrix::outer(&JonesVector::circular_right(), &JonesVector::linear(0.4)).scale(c(2.0, 1.0));
        let pd = polar_decompose(&a);
        assert!(pd.u.is_unitary(1e-12));
        assert!(pd.r.is_psd(1e-12));
        assert!(pd.residual < 1e-14);
        // Bit-reproducible on repeat.
        assert_eq!(pd, polar_decompose(&a));
    }

    #[test]
    fn weak_value_of_proj_h_paper_configuration() {
        let plus = JonesVector::diagonal();
        let phi = JonesMatrix::pauli_x().apply(&plus);
        let w = weak_value(&JonesMatrix::proj_h(), &plus, &phi).unwrap();
        assert!((w - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weak_value_on_theta_grid() {
        let plus = JonesVector::diagonal();
        for deg in 1..90 {
            let t = (deg as f64).to_radians();
            let phi = hwp(t).apply(&plus);
            let w = weak_value(&JonesMatrix::proj_h(), &plus, &phi).unwrap();
            let (s, cc) = (2.0 * t).sin_cos();
            let expected = (cc + s) / (2.0 * s);
            assert!((w - c(expected, 0.0)).norm() < 1e-12, "θ={deg}");
        }
    }

    #[test]
    fn weak_value_orthogonal_selection_errors() {
        let e = weak_value(&JonesMatrix::proj_h(), &JonesVector::diagonal(), &JonesVector::antidiagonal()).unwrap_err();
        assert!(matches!(e, JonesError::OrthogonalSelection { .. }));
    }

    #[test]
    fn chain_for_lowering_operator() {
        let chain = weak_value_chain(&JonesMatrix::lowering(), &JonesVector::diagonal()).unwrap();
        assert!((chain.z - c(0.5, 0.0)).norm() < 1e-12);
        assert!((chain.weak_value - c(0.5, 0.0)).norm() < 1e-12);
        assert!((chain.overlap - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn chain_for_hermitian_psd_is_real() {
        let a = JonesMatrix::new(c(2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3), c(1.0, 0.0));
        let psi = JonesVector::new(c(0.6, 0.0), c(0.0, 0.8));
        let z = nonhermitian_expectation_via_weak(&a, &psi).unwrap();
        let direct = expectation(&a, &psi).unwrap();
        assert!((z - direct).norm() < 1e-12);
        assert!(z.im.abs() < 1e-12);
        let pd = polar_decompose(&a);
        assert!(pd.u.approx_eq(&JonesMatrix::identity(), 1e-12));
    }

    #[test]
    fn wave_plates() {
        let out = hwp(FRAC_PI_8).apply(&JonesVector::horizontal());
        assert!((out - JonesVector::diagonal()).norm() < 1e-15);
        assert!(hwp(FRAC_PI_4).approx_eq(&JonesMatrix::pauli_x(), 1e-15));
        assert_eq!(polarizer(0.0), JonesMatrix::proj_h());
        assert!(retarder(0.37, PI).approx_eq(&hwp(0.37), 1e-15));
        for t in [0.0, 0.3, 1.2, -2.0] {
            assert!(qwp(t).is_unitary(1e-14));
            let p = polarizer(t);
            assert!((p * p).approx_eq(&p, 1e-15));
            assert!((p.trace() - ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn class_operator_matches_closed_form() {
        let t: f64 = 0.41;
        let (s, cc) = (2.0 * t).sin_cos();
        assert!(class_operator(t).approx_eq(&JonesMatrix::from_real(cc, 0.0, s, 0.0), 1e-15));
    }

    #[test]
    fn projectors_sum_to_identity() {
        assert_eq!(JonesMatrix::proj_h() + JonesMatrix::proj_v(), JonesMatrix::identity());
    }

    #[test]
    fn named_states_are_canonical() {
        assert_eq!(JonesVector::horizontal().norm_sqr(), 1.0);
        assert_eq!(JonesVector::vertical().norm_sqr(), 1.0);
        assert!(JonesVector::diagonal().is_normalized(1e-15));
        assert_eq!(JonesVector::diagonal().h, JonesVector::diagonal().v);
    }

    #[test]
    fn json_wire_format() {
        let m = JonesMatrix::new(c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0],[5.0,6.0],[7.0,8.0]]");
        let back: JonesMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<JonesMatrix>("[[1,2],[3,4]]").is_err());
    }
}
