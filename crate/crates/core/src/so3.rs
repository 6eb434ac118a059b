//! Rotation algebra used by the cooperative task space.
//!
//! Conventions, fixed crate-wide:
//!
//! * quaternions are stored scalar-first, `{eta, eps}`;
//! * the product is the Hamilton product;
//! * a quaternion describes the orientation of a frame with respect to the
//!   world frame, and world-frame angular velocities act by left
//!   multiplication, `q̇ = ½ {0, ω} q`.
//!
//! There is no rotation-matrix type. Angle-axis is the only alternative
//! representation, used for fractional rotations.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Below this angle (rad) a rotation is treated as the identity and its axis
/// defaults to `[1, 0, 0]`.
pub const ANGLE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub eta: f64,
    pub eps: Vec3,
}

impl Quaternion {
    pub const fn new(eta: f64, eps: Vec3) -> Self {
        Self { eta, eps }
    }

    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::new(w, Vec3::new(x, y, z))
    }

    pub fn identity() -> Self {
        Self::new(1.0, Vec3::zeros())
    }

    pub fn to_wxyz(&self) -> [f64; 4] {
        [self.eta, self.eps.x, self.eps.y, self.eps.z]
    }

    /// Four-dimensional inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.eta * other.eta + self.eps.dot(&other.eps)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.eps.iter().all(|c| c.is_finite())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.eta / n, self.eps / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.eta, -self.eps)
    }

    /// Short-rotation representative: flips the sign when `eta < 0`.
    /// `eta == 0` is left as computed.
    pub fn canonical(&self) -> Self {
        if self.eta < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Rotation angle in `[0, π]` of the short-rotation representative.
    pub fn angle(&self) -> f64 {
        let q = self.canonical();
        2.0 * q.eps.norm().atan2(q.eta)
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

/// Raw Hamilton product, no normalization.
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.eta * rhs.eta - self.eps.dot(&rhs.eps),
            rhs.eps * self.eta + self.eps * rhs.eta + self.eps.cross(&rhs.eps),
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.eta, -self.eps)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}, [{}, {}, {}]}}",
            self.eta, self.eps.x, self.eps.y, self.eps.z
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleAxis {
    pub angle: f64,
    pub axis: Vec3,
}

impl AngleAxis {
    pub fn new(angle: f64, axis: Vec3) -> Self {
        Self { angle, axis }
    }

    /// Same axis, angle multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.angle * factor, self.axis)
    }
}

/// Hamilton product of two unit quaternions, renormalized.
pub fn quat_mul(a: &Quaternion, b: &Quaternion) -> Result<Quaternion> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite quaternion operand: {a} * {b}"
        )));
    }
    Ok((*a * *b).normalized())
}

/// Inverse of a unit quaternion (its conjugate).
pub fn quat_inverse(q: &Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn quat_to_angle_axis(q: &Quaternion) -> AngleAxis {
    let q = q.canonical();
    let s = q.eps.norm();
    let angle = 2.0 * s.atan2(q.eta);
    if angle < ANGLE_EPSILON {
        AngleAxis::new(0.0, Vec3::x())
    } else {
        AngleAxis::new(angle.min(PI), q.eps / s)
    }
}

pub fn angle_axis_to_quat(aa: &AngleAxis) -> Result<Quaternion> {
    if !aa.angle.is_finite() || !aa.axis.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite angle-axis: angle {}, axis {:?}",
            aa.angle,
            aa.axis.as_slice()
        )));
    }
    if aa.angle == 0.0 {
        return Ok(Quaternion::identity());
    }
    let n = aa.axis.norm();
    if n == 0.0 {
        return Err(Error::InvalidArgument(
            "zero-length rotation axis with non-zero angle".into(),
        ));
    }
    let (s, c) = (0.5 * aa.angle).sin_cos();
    Ok(Quaternion::new(c, aa.axis * (s / n)))
}

/// `S(eps) omega = eps × omega`.
pub fn skew_apply(eps: &Vec3, omega: &Vec3) -> Vec3 {
    eps.cross(omega)
}
