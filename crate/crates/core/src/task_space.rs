//! Cooperative task space: absolute and relative frames of a dual-arm system
//! and the linear maps between end-effector twists and absolute/relative
//! twists.
//!
//! Twists are expressed in the world frame. The relative orientation is
//! `q_r = q_1⁻¹ q_2`; fractional rotations are taken along its short
//! geodesic, so the weighted absolute frame moves from `h_1` (weight 1) to
//! `h_2` (weight 0) and passes through the geodesic midpoint at 0.5.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::so3::{
    angle_axis_to_quat, quat_inverse, quat_to_angle_axis, Quaternion, Vec3, ANGLE_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub p: Vec3,
    pub q: Quaternion,
}

impl Pose {
    pub fn new(p: Vec3, q: Quaternion) -> Self {
        Self { p, q }
    }

    pub fn from_position(p: Vec3) -> Self {
        Self::new(p, Quaternion::identity())
    }
}

/// Linear and angular velocity of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub lin: Vec3,
    pub ang: Vec3,
}

impl Twist {
    pub fn new(lin: Vec3, ang: Vec3) -> Self {
        Self { lin, ang }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear(lin: Vec3) -> Self {
        Self::new(lin, Vec3::zeros())
    }

    /// Scales the linear block by `lin` and the angular block by `ang`.
    pub fn scale_blocks(&self, lin: f64, ang: f64) -> Self {
        Self::new(self.lin * lin, self.ang * ang)
    }

    pub fn is_finite(&self) -> bool {
        self.lin.iter().chain(self.ang.iter()).all(|c| c.is_finite())
    }
}

impl Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.lin + rhs.lin, self.ang + rhs.ang)
    }
}

impl Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.lin - rhs.lin, self.ang - rhs.ang)
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.lin, -self.ang)
    }
}

impl Mul<f64> for Twist {
    type Output = Twist;
    fn mul(self, rhs: f64) -> Twist {
        Twist::new(self.lin * rhs, self.ang * rhs)
    }
}

/// Cooperation parameters: the share of the relative task carried by each
/// arm, separately for translation (`alpha_p`) and rotation (`alpha_omega`).
/// 0.5 is the symmetric split; 0 and 1 are the master-slave endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperationState {
    pub alpha_p: f64,
    pub alpha_omega: f64,
}

impl CooperationState {
    pub const SYMMETRIC: CooperationState = CooperationState::new(0.5, 0.5);

    pub const fn new(alpha_p: f64, alpha_omega: f64) -> Self {
        Self {
            alpha_p,
            alpha_omega,
        }
    }
}

impl Default for CooperationState {
    fn default() -> Self {
        Self::SYMMETRIC
    }
}

/// Rotates `q1` by `fraction` of the short geodesic from `q1` to `q2`.
fn interpolate_orientation(q1: &Quaternion, q2: &Quaternion, fraction: f64) -> Result<Quaternion> {
    if fraction == 0.0 {
        return Ok(*q1);
    }
    let rel = (quat_inverse(q1) * *q2).normalized().canonical();
    if rel.eta < 0.5 * ANGLE_EPSILON && fraction != 1.0 {
        return Err(Error::AmbiguousMidpoint);
    }
    let step = angle_axis_to_quat(&quat_to_angle_axis(&rel).scaled(fraction))?;
    Ok((*q1 * step).normalized())
}

/// Absolute frame `{h_a}`: mean position and geodesic-midpoint orientation.
pub fn absolute_frame(h1: &Pose, h2: &Pose) -> Result<Pose> {
    Ok(Pose::new(
        0.5 * (h1.p + h2.p),
        interpolate_orientation(&h1.q, &h2.q, 0.5)?,
    ))
}

/// Relative frame `{h_r}`: `(p_2 − p_1, q_1⁻¹ q_2)`.
pub fn relative_frame(h1: &Pose, h2: &Pose) -> (Vec3, Quaternion) {
    (h2.p - h1.p, (quat_inverse(&h1.q) * h2.q).normalized())
}

/// Weighted absolute frame: `alpha·p_1 + (1 − alpha)·p_2`, orientation `q_1`
/// rotated by `(1 − alpha)` of the relative rotation.
pub fn ects_absolute_frame(h1: &Pose, h2: &Pose, alpha: f64) -> Result<Pose> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cooperation parameter must be finite, got {alpha}"
        )));
    }
    Ok(Pose::new(
        alpha * h1.p + (1.0 - alpha) * h2.p,
        interpolate_orientation(&h1.q, &h2.q, 1.0 - alpha)?,
    ))
}

/// End-effector twists to `(v_a, v_r)`.
pub fn cts_forward(v1: &Twist, v2: &Twist) -> (Twist, Twist) {
    ((*v1 + *v2) * 0.5, *v2 - *v1)
}

/// Resolves desired absolute and relative twists into end-effector twists:
/// `v_1 = v_a − (I − Λ) v_r`, `v_2 = v_a + Λ v_r`, where `Λ` scales the
/// linear block by `alpha_p` and the angular block by `alpha_omega`.
pub fn ects_resolve(v_a_d: &Twist, v_r_d: &Twist, coop: &CooperationState) -> (Twist, Twist) {
    let share_2 = v_r_d.scale_blocks(coop.alpha_p, coop.alpha_omega);
    let share_1 = v_r_d.scale_blocks(1.0 - coop.alpha_p, 1.0 - coop.alpha_omega);
    (*v_a_d - share_1, *v_a_d + share_2)
}

/// Absolute twist actually realized when `(v_a_d, v_r_d)` is resolved with
/// `coop`: any asymmetry leaks `(alpha − 0.5)·v_r_d` into the absolute motion.
pub fn absolute_twist_effect(v_a_d: &Twist, v_r_d: &Twist, coop: &CooperationState) -> Twist {
    Twist::new(
        (coop.alpha_p - 0.5) * v_r_d.lin + v_a_d.lin,
        (coop.alpha_omega - 0.5) * v_r_d.ang + v_a_d.ang,
    )
}
