//! Unit-quaternion and bivector algebra of the even subalgebra of Cl(3,0).
//!
//! A quaternion is stored as `w + I·v`: a scalar plus the bivector dual to
//! the 3-vector `v` under the pseudoscalar `I`. The pseudoscalar itself is
//! never materialized. In this representation the geometric product of two
//! vectors is `u v = u·v + I(u×v)`, and two even elements multiply as
//!
//! ```text
//! (w1 + I v1)(w2 + I v2) = (w1 w2 - v1·v2) + I(w1 v2 + w2 v1 - v1×v2)
//! ```
//!
//! This is the Hamilton product up to the sign of the bivector part
//! (Hamilton's `i, j, k` correspond to `-I e1, -I e2, -I e3`), and it is the
//! convention in which the composite half-angle and axis formulas hold.
//!
//! The sign of `w` carries the spinorial information. Nothing in this module
//! canonicalizes a quaternion to `w >= 0`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sign::Sign;

/// Tolerance on `|‖v‖ - 1|` for anything claiming to be a unit element.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// How far outside `[-1, 1]` an `acos` argument may drift before it is an
/// error rather than rounding noise.
pub const ACOS_SLACK: f64 = 1e-9;

/// Below this `sin(η)` the composite axis is not defined.
pub const SINGULAR_SIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaError {
    #[error("vector norm {norm} is not 1 within {NORM_TOLERANCE}")]
    NotNormalized { norm: f64 },
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
    #[error("rotation angle {psi} outside [0, 4π)")]
    AngleOutOfRange { psi: f64 },
    #[error("winding index {kappa} is negative")]
    NegativeWinding { kappa: i64 },
    #[error("acos argument {value} lies outside [-1, 1] by more than {ACOS_SLACK}")]
    AcosDomain { value: f64 },
    #[error("composite axis is singular: sin(η) = {sin_eta}, numerator = {numerator}")]
    SingularAxis { sin_eta: f64, numerator: Vec3 },
    #[error("non-finite input")]
    NonFinite,
}

/// Plain 3-vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x)
            .abs()
            .max((self.y - o.y).abs())
            .max((self.z - o.z).abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        self.scale(k)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A direction in space: detector setting, spin axis, or rotation axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVector3(Vec3);

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVector3 = UnitVector3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVector3 = UnitVector3(Vec3::new(0.0, 0.0, 1.0));

    /// Accepts `(x, y, z)` only if it already has unit norm.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GaError> {
        Self::try_from(Vec3::new(x, y, z))
    }

    /// Rescales any nonzero vector to unit length.
    pub fn normalize(v: Vec3) -> Result<Self, GaError> {
        if !v.is_finite() {
            return Err(GaError::NonFinite);
        }
        let n = v.norm();
        if n < f64::MIN_POSITIVE.sqrt() {
            return Err(GaError::ZeroVector);
        }
        Ok(UnitVector3(v.scale(1.0 / n)))
    }

    /// Direction at angle `theta` (radians) from x̂ in the xy-plane.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        UnitVector3(Vec3::new(c, s, 0.0))
    }

    /// Direction with polar angle `theta` from ẑ and azimuth `phi`.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector3(Vec3::new(st * cp, st * sp, ct))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, o: UnitVector3) -> f64 {
        self.0.dot(o.0)
    }

    pub fn cross(self, o: UnitVector3) -> Vec3 {
        self.0.cross(o.0)
    }

    /// Angle between the two directions, in `[0, π]`.
    ///
    /// Uses `atan2(‖u×v‖, u·v)`, which stays accurate near 0 and π.
    pub fn angle_to(self, o: UnitVector3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    /// Azimuth in the xy-plane, `atan2(y, x)`.
    pub fn azimuth(self) -> f64 {
        self.0.y.atan2(self.0.x)
    }
}

impl TryFrom<Vec3> for UnitVector3 {
    type Error = GaError;
    fn try_from(v: Vec3) -> Result<Self, GaError> {
        if !v.is_finite() {
            return Err(GaError::NonFinite);
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(GaError::NotNormalized { norm });
        }
        Ok(UnitVector3(v))
    }
}

impl From<UnitVector3> for Vec3 {
    fn from(u: UnitVector3) -> Vec3 {
        u.0
    }
}

impl Neg for UnitVector3 {
    type Output = UnitVector3;
    fn neg(self) -> UnitVector3 {
        UnitVector3(-self.0)
    }
}

/// `acos` with the argument clamped to `[-1, 1]` when it is within
/// [`ACOS_SLACK`] outside; farther excursions are errors.
pub fn clamped_acos(x: f64) -> Result<f64, GaError> {
    if !x.is_finite() {
        return Err(GaError::NonFinite);
    }
    if !(-1.0 - ACOS_SLACK..=1.0 + ACOS_SLACK).contains(&x) {
        return Err(GaError::AcosDomain { value: x });
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// Element `w + I·v` of the even subalgebra. Elements of S³ have
/// `w² + ‖v‖² = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    w: f64,
    v: Vec3,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        v: Vec3::ZERO,
    };

    /// Validated constructor: the result must lie on S³.
    pub fn new(w: f64, v: Vec3) -> Result<Self, GaError> {
        if !w.is_finite() || !v.is_finite() {
            return Err(GaError::NonFinite);
        }
        let norm = (w * w + v.norm_sq()).sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(GaError::NotNormalized { norm });
        }
        Ok(Quaternion { w, v })
    }

    /// `q(ψ, r) = cos(ψ/2) + (I·r) sin(ψ/2)` for `ψ ∈ [0, 4π)`.
    pub fn from_axis_angle(r: UnitVector3, psi: f64) -> Result<Self, GaError> {
        if !psi.is_finite() {
            return Err(GaError::NonFinite);
        }
        if !(0.0..4.0 * PI).contains(&psi) {
            return Err(GaError::AngleOutOfRange { psi });
        }
        Ok(Self::from_half_angle(r, psi / 2.0))
    }

    /// `cos(η) + (I·r) sin(η)` for any real half-angle `η`. Leaving the
    /// `[0, 2π)` range is how the winding signs of the measurement functions
    /// are realized.
    pub fn from_half_angle(r: UnitVector3, eta: f64) -> Self {
        let (s, c) = eta.sin_cos();
        Quaternion {
            w: c,
            v: r.vec().scale(s),
        }
    }

    /// Geometric product of two unit vectors, `u v = u·v + I(u×v)`.
    pub fn from_vectors(u: UnitVector3, v: UnitVector3) -> Self {
        Quaternion {
            w: u.dot(v),
            v: u.cross(v),
        }
    }

    /// Unchecked constructor for internal products.
    pub(crate) fn raw(w: f64, v: Vec3) -> Self {
        Quaternion { w, v }
    }

    pub fn w(self) -> f64 {
        self.w
    }

    /// Bivector coefficients under the `I` duality.
    pub fn v(self) -> Vec3 {
        self.v
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.v.norm_sq()).sqrt()
    }

    /// Reverse `q†`; the inverse on S³.
    pub fn reverse(self) -> Self {
        Quaternion {
            w: self.w,
            v: -self.v,
        }
    }

    /// Rescale to unit norm, keeping the sign of `w`.
    pub fn normalized(self) -> Result<Self, GaError> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(GaError::NonFinite);
        }
        if n < f64::MIN_POSITIVE.sqrt() {
            return Err(GaError::ZeroVector);
        }
        Ok(Quaternion {
            w: self.w / n,
            v: self.v.scale(1.0 / n),
        })
    }

    /// Half of the rotation angle, in `[0, π]`.
    pub fn half_angle(self) -> f64 {
        self.v.norm().atan2(self.w)
    }

    /// Rotation axis, or `None` for `±1`.
    pub fn axis(self) -> Option<UnitVector3> {
        UnitVector3::normalize(self.v).ok()
    }

    /// `(-1)^κ q`, which equals `q(η + κπ, r)` for `q = q(η, r)`.
    pub fn spinorial_sign(self, kappa: i64) -> Result<Self, GaError> {
        if kappa < 0 {
            return Err(GaError::NegativeWinding { kappa });
        }
        Ok(if kappa % 2 == 0 { self } else { -self })
    }

    /// Multiply by a ±1 scalar.
    pub fn signed(self, s: Sign) -> Self {
        match s {
            Sign::Plus => self,
            Sign::Minus => -self,
        }
    }

    /// `q x q†` for a vector `x`.
    pub fn rotate_vector(self, x: Vec3) -> Vec3 {
        // I commutes with everything, so q (I x) q† = I (q x q†).
        (self * Quaternion::raw(0.0, x) * self.reverse()).v
    }

    /// `q J q†`. Invariant under `q ↦ -q`.
    pub fn rotate_bivector(self, j: &Bivector) -> Bivector {
        let axis = self.rotate_vector(j.axis.vec());
        // A rotation preserves length; renormalize away the rounding only.
        let axis = UnitVector3::normalize(axis).unwrap_or(j.axis);
        Bivector {
            axis,
            magnitude: j.magnitude,
            orientation: j.orientation,
        }
    }

    pub fn max_abs_diff(self, o: Quaternion) -> f64 {
        (self.w - o.w).abs().max(self.v.max_abs_diff(o.v))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.v.dot(o.v),
            v: o.v.scale(self.w) + self.v.scale(o.w) - self.v.cross(o.v),
        }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion {
            w: -self.w,
            v: -self.v,
        }
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + I·{}", self.w, self.v)
    }
}

/// Oriented plane of rotation: `orientation · magnitude · (I·axis)`.
///
/// Spin and detector bivectors are related by `L(n, λ) = λ D(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bivector {
    pub axis: UnitVector3,
    pub magnitude: f64,
    pub orientation: Sign,
}

impl Bivector {
    /// Detector bivector `D(n)`.
    pub fn detector(n: UnitVector3) -> Self {
        Bivector {
            axis: n,
            magnitude: 1.0,
            orientation: Sign::Plus,
        }
    }

    /// Spin bivector `L(n, λ) = λ D(n)`.
    pub fn spin(n: UnitVector3, lambda: Sign) -> Self {
        Bivector {
            axis: n,
            magnitude: 1.0,
            orientation: lambda,
        }
    }

    /// Bivector `J(r)` of unit magnitude about `r`.
    pub fn about(r: UnitVector3) -> Self {
        Self::detector(r)
    }

    /// Coefficient vector `c` with `B = I·c`.
    pub fn coefficients(&self) -> Vec3 {
        self.axis
            .vec()
            .scale(self.magnitude * self.orientation.as_f64())
    }

    /// `λ` such that `self = λ · other` when both share axis and magnitude.
    pub fn relative_orientation(&self, other: &Bivector) -> Option<Sign> {
        let same_plane = self.axis.vec().max_abs_diff(other.axis.vec()) <= NORM_TOLERANCE
            && (self.magnitude - other.magnitude).abs() <= NORM_TOLERANCE;
        same_plane.then(|| self.orientation * other.orientation)
    }

    /// Geometric product of two bivectors, an even element.
    ///
    /// `(I p)(I q) = -p·q - I(p×q)`. For unit-magnitude inputs the result is
    /// on S³.
    pub fn product(&self, other: &Bivector) -> Quaternion {
        Quaternion::raw(0.0, self.coefficients()) * Quaternion::raw(0.0, other.coefficients())
    }

    /// Same plane and orientation within `tol`.
    pub fn approx_eq(&self, other: &Bivector, tol: f64) -> bool {
        self.coefficients().max_abs_diff(other.coefficients()) <= tol
    }
}

/// Half-angle `η_uv` of the product `q(η_as₁, r₁) q(η_s₂b, r₂)`:
///
/// `acos{(a·s₁)(s₂·b) - (a·s₂)(s₁·b) + (a·b)(s₁·s₂)}`.
pub fn composite_angle(
    a: UnitVector3,
    s1: UnitVector3,
    s2: UnitVector3,
    b: UnitVector3,
) -> Result<f64, GaError> {
    let arg = a.dot(s1) * s2.dot(b) - a.dot(s2) * s1.dot(b) + a.dot(b) * s1.dot(s2);
    clamped_acos(arg)
}

/// Numerator of the composite axis,
/// `(a·s₁)(s₂×b) + (s₂·b)(a×s₁) - (a×s₁)×(s₂×b)`.
///
/// Its norm is `sin(η_uv)`, and it vanishes as `s₁ → a`, `s₂ → b`.
pub fn composite_axis_numerator(
    a: UnitVector3,
    s1: UnitVector3,
    s2: UnitVector3,
    b: UnitVector3,
) -> Vec3 {
    let a_s1 = a.cross(s1);
    let s2_b = s2.cross(b);
    s2_b.scale(a.dot(s1)) + a_s1.scale(s2.dot(b)) - a_s1.cross(s2_b)
}

/// Composite rotation axis `r₀ = numerator / sin(η_uv)`.
///
/// When `sin(η_uv) < 1e-12` the quotient is undefined and the error carries
/// the numerator, which is then itself below 1e-12 in norm.
pub fn composite_axis(
    a: UnitVector3,
    s1: UnitVector3,
    s2: UnitVector3,
    b: UnitVector3,
    eta_uv: f64,
) -> Result<Vec3, GaError> {
    let numerator = composite_axis_numerator(a, s1, s2, b);
    let sin_eta = eta_uv.sin();
    if !sin_eta.is_finite() {
        return Err(GaError::NonFinite);
    }
    if sin_eta.abs() < SINGULAR_SIN {
        return Err(GaError::SingularAxis { sin_eta, numerator });
    }
    Ok(numerator.scale(1.0 / sin_eta))
}

/// Geodesic distance on S³ ≅ SU(2), in `[0, π]`.
///
/// This is `acos` of the scalar part of `p q†`, evaluated as
/// `atan2(‖vec(p q†)‖, scalar(p q†))` for accuracy near 0 and π.
pub fn dist_su2(p: Quaternion, q: Quaternion) -> f64 {
    let d = p * q.reverse();
    d.v.norm().atan2(d.w)
}

/// Geodesic distance on ℝP³ ≅ SO(3), in `[0, π/2]`: the S³ distance with
/// antipodes identified.
pub fn dist_so3(p: Quaternion, q: Quaternion) -> f64 {
    dist_su2(p, q).min(dist_su2(p, -q))
}

/// One sample of the S³ vs ℝP³ geodesic comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPoint {
    /// Half of the rotation angle, in `[0, π]`.
    pub half_angle: f64,
    /// Full rotation angle `ψ = 2 · half_angle`.
    pub rotation_angle: f64,
    pub d_su2: f64,
    pub d_so3: f64,
}

/// Distances from the identity to `q(ψ, axis)` for `steps + 1` evenly
/// spaced half-angles covering `[0, π]`.
pub fn geodesic_sweep(axis: UnitVector3, steps: usize) -> Vec<GeodesicPoint> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|k| {
            let half_angle = PI * k as f64 / steps as f64;
            let q = Quaternion::from_half_angle(axis, half_angle);
            GeodesicPoint {
                half_angle,
                rotation_angle: 2.0 * half_angle,
                d_su2: dist_su2(Quaternion::IDENTITY, q),
                d_so3: dist_so3(Quaternion::IDENTITY, q),
            }
        })
        .collect()
}
