//! Absolute-motion feedback laws, relative-motion laws, cooperation-parameter
//! update laws and the Lyapunov functions certifying them.
//!
//! Every law here is a pure function of explicit state.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::so3::{quat_inverse, Quaternion, Vec3};
use crate::task_space::{absolute_frame, CooperationState, Pose, Twist};

/// Absolute pose error: `p̃ = p_d − p_a` and `q̃ = q_d q_a⁻¹` with `η̃ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsoluteError {
    pub p_tilde: Vec3,
    pub q_tilde: Quaternion,
}

impl AbsoluteError {
    pub fn zero() -> Self {
        Self {
            p_tilde: Vec3::zeros(),
            q_tilde: Quaternion::identity(),
        }
    }

    pub fn eps_tilde(&self) -> Vec3 {
        self.q_tilde.eps
    }

    /// Angle of the orientation error.
    pub fn angle(&self) -> f64 {
        self.q_tilde.angle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    /// Diagonal of `K_p` (1/s).
    pub k_p_mat: Vec3,
    /// Diagonal of `K_ω` (1/s).
    pub k_omega_mat: Vec3,
    /// Diagonal of `K_r` (1/s): linear block first, then angular.
    pub k_r_mat: [f64; 6],
    pub gamma_p: f64,
    pub gamma_omega: f64,
    pub k_p_damp: f64,
    pub k_omega_damp: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_p_mat: Vec3::repeat(1.0),
            k_omega_mat: Vec3::repeat(1.0),
            k_r_mat: [1.0; 6],
            gamma_p: 100.0,
            gamma_omega: 100.0,
            k_p_damp: 0.25,
            k_omega_damp: 0.25,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "gain {name} must be positive and finite, got {v}"
                )))
            }
        };
        for (i, v) in self.k_p_mat.iter().enumerate() {
            positive(&format!("k_p_mat[{i}]"), *v)?;
        }
        for (i, v) in self.k_omega_mat.iter().enumerate() {
            positive(&format!("k_omega_mat[{i}]"), *v)?;
        }
        for (i, v) in self.k_r_mat.iter().enumerate() {
            positive(&format!("k_r_mat[{i}]"), *v)?;
        }
        positive("gamma_p", self.gamma_p)?;
        positive("gamma_omega", self.gamma_omega)?;
        for (name, v) in [
            ("k_p_damp", self.k_p_damp),
            ("k_omega_damp", self.k_omega_damp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "gain {name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn k_r_lin(&self) -> Vec3 {
        Vec3::new(self.k_r_mat[0], self.k_r_mat[1], self.k_r_mat[2])
    }

    fn k_r_ang(&self) -> Vec3 {
        Vec3::new(self.k_r_mat[3], self.k_r_mat[4], self.k_r_mat[5])
    }
}

/// How the relative task is shared between the arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CooperationMode {
    /// Fixed 0.5 split, uncompensated feedback.
    Symmetric,
    /// Fixed split at the given values, uncompensated feedback. `(1, 1)` is
    /// master-slave with arm 1 as master.
    Constant { alpha_p: f64, alpha_omega: f64 },
    /// Cooperation parameters adapted by the unconstrained update laws.
    Asymmetric,
    /// Cooperation parameters adapted by the barrier update laws, which keep
    /// them inside (0, 1).
    Barrier,
    /// Fixed split taken from the initial state, with feedback that cancels
    /// the leak of the relative twist into the absolute motion.
    Compensating,
}

impl CooperationMode {
    /// Master-slave, arm 1 leading.
    pub const MASTER_SLAVE: CooperationMode = CooperationMode::Constant {
        alpha_p: 1.0,
        alpha_omega: 1.0,
    };

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Self::Asymmetric | Self::Barrier)
    }

    pub fn uses_barrier(&self) -> bool {
        matches!(self, Self::Barrier)
    }

    /// Short lowercase name used in file names and tables.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::Constant { .. } => "constant",
            Self::Asymmetric => "asymmetric",
            Self::Barrier => "barrier",
            Self::Compensating => "compensating",
        }
    }
}

impl fmt::Display for CooperationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant {
                alpha_p,
                alpha_omega,
            } if *alpha_p == 1.0 && *alpha_omega == 1.0 => write!(f, "constant"),
            Self::Constant {
                alpha_p,
                alpha_omega,
            } => write!(f, "constant:{alpha_p},{alpha_omega}"),
            other => f.write_str(other.label()),
        }
    }
}

/// Parses `symmetric`, `asymmetric`, `barrier`, `compensating`, `constant`
/// (master-slave), `constant:<a>` or `constant:<a_p>,<a_omega>`.
impl FromStr for CooperationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "symmetric" => return Ok(Self::Symmetric),
            "asymmetric" => return Ok(Self::Asymmetric),
            "barrier" => return Ok(Self::Barrier),
            "compensating" => return Ok(Self::Compensating),
            "constant" => return Ok(Self::MASTER_SLAVE),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("unknown cooperation mode `{s}`"));
        let values = lower.strip_prefix("constant:").ok_or_else(bad)?;
        let parsed: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (alpha_p, alpha_omega) = match parsed.as_slice() {
            [a] => (*a, *a),
            [a, b] => (*a, *b),
            _ => return Err(bad()),
        };
        if !(alpha_p.is_finite() && alpha_omega.is_finite()) {
            return Err(bad());
        }
        Ok(Self::Constant {
            alpha_p,
            alpha_omega,
        })
    }
}

pub fn absolute_errors(target: &Pose, h1: &Pose, h2: &Pose) -> Result<AbsoluteError> {
    let ha = absolute_frame(h1, h2)?;
    Ok(AbsoluteError {
        p_tilde: target.p - ha.p,
        q_tilde: (target.q * quat_inverse(&ha.q)).normalized().canonical(),
    })
}

/// `ṗ_a_d = K_p p̃`.
pub fn position_law(err: &AbsoluteError, gains: &Gains) -> Vec3 {
    gains.k_p_mat.component_mul(&err.p_tilde)
}

/// `ṗ_a_d = −(alpha_p − 0.5) ṗ_r_d + K_p p̃`: cancels the relative-motion leak,
/// reducing the closed loop to the symmetric one.
pub fn compensating_position_law(
    err: &AbsoluteError,
    v_r_lin: &Vec3,
    alpha_p: f64,
    gains: &Gains,
) -> Vec3 {
    position_law(err, gains) - (alpha_p - 0.5) * v_r_lin
}

/// `ω_a_d = K_ω ε̃`.
pub fn orientation_law(err: &AbsoluteError, gains: &Gains) -> Vec3 {
    gains.k_omega_mat.component_mul(&err.q_tilde.eps)
}

/// Angular counterpart of [`compensating_position_law`].
pub fn compensating_orientation_law(
    err: &AbsoluteError,
    omega_r: &Vec3,
    alpha_omega: f64,
    gains: &Gains,
) -> Vec3 {
    orientation_law(err, gains) - (alpha_omega - 0.5) * omega_r
}

/// Relative velocity that brings two points together: `p_1 − p_2`.
pub fn relative_point_law(p1: &Vec3, p2: &Vec3) -> Vec3 {
    p1 - p2
}

/// Relative twist `K_r [p_1 − p_2; ε̃_r]` with `q̃_r = q_1 q_2⁻¹`, `η̃_r ≥ 0`.
pub fn relative_pose_law(h1: &Pose, h2: &Pose, gains: &Gains) -> Twist {
    let q_r = (h1.q * quat_inverse(&h2.q)).normalized().canonical();
    Twist::new(
        gains.k_r_lin().component_mul(&(h1.p - h2.p)),
        gains.k_r_ang().component_mul(&q_r.eps),
    )
}

fn barrier_factor(name: &'static str, alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha * (1.0 - alpha))
    } else {
        Err(Error::BarrierDomain { name, value: alpha })
    }
}

/// `α̇_p = γ_p (p̃ᵀṗ_r − (α_p − 0.5)(k_p + |p̃ᵀṗ_r|))`, multiplied by
/// `α_p (1 − α_p)` in barrier form.
pub fn alpha_p_rate(
    err: &AbsoluteError,
    v_r_lin: &Vec3,
    alpha_p: f64,
    gains: &Gains,
    barrier: bool,
) -> Result<f64> {
    let coupling = err.p_tilde.dot(v_r_lin);
    let rate = gains.gamma_p
        * (coupling - (alpha_p - 0.5) * (gains.k_p_damp + coupling.abs()));
    if barrier {
        Ok(barrier_factor("alpha_p", alpha_p)? * rate)
    } else {
        Ok(rate)
    }
}

/// `α̇_ω = γ_ω (ε̃ᵀω_r − k_ω (α_ω − 0.5))`, multiplied by `α_ω (1 − α_ω)` in
/// barrier form. The damping is `k_ω` alone, unlike the linear law.
pub fn alpha_omega_rate(
    err: &AbsoluteError,
    omega_r: &Vec3,
    alpha_omega: f64,
    gains: &Gains,
    barrier: bool,
) -> Result<f64> {
    let coupling = err.q_tilde.eps.dot(omega_r);
    let rate = gains.gamma_omega * (coupling - gains.k_omega_damp * (alpha_omega - 0.5));
    if barrier {
        Ok(barrier_factor("alpha_omega", alpha_omega)? * rate)
    } else {
        Ok(rate)
    }
}

/// `½ p̃ᵀp̃`.
pub fn v_position(err: &AbsoluteError) -> f64 {
    0.5 * err.p_tilde.norm_squared()
}

/// Squared distance between the desired and current orientation
/// quaternions, `(η_d − η_a)² + |ε_d − ε_a|²`, written in terms of the
/// error quaternion: `(1 − η̃)² + |ε̃|² = 2(1 − η̃)`.
pub fn v_orientation(err: &AbsoluteError) -> f64 {
    let q = err.q_tilde;
    (1.0 - q.eta).powi(2) + q.eps.norm_squared()
}

/// `½ (α − 0.5)²`.
pub fn v_asym(alpha: f64) -> f64 {
    0.5 * (alpha - 0.5).powi(2)
}

/// `½ ln(1 / (1 − ((α − 0.5)/0.5)²))` on (0, 1); `+∞` elsewhere.
pub fn v_barrier(alpha: f64) -> f64 {
    if !(alpha > 0.0 && alpha < 1.0) {
        return f64::INFINITY;
    }
    // 1 - (2α - 1)² = 4α(1 - α), which does not cancel near the boundary
    -0.5 * (4.0 * alpha * (1.0 - alpha)).ln()
}

/// Composite Lyapunov function for `mode`. Barrier terms at or beyond the
/// domain boundary evaluate to `+∞`.
pub fn lyapunov(
    err: &AbsoluteError,
    coop: &CooperationState,
    gains: &Gains,
    mode: &CooperationMode,
) -> f64 {
    let base = v_position(err) + v_orientation(err);
    match mode {
        CooperationMode::Asymmetric => {
            base + v_asym(coop.alpha_p) / gains.gamma_p
                + v_asym(coop.alpha_omega) / gains.gamma_omega
        }
        CooperationMode::Barrier => {
            base + v_barrier(coop.alpha_p) / gains.gamma_p
                + v_barrier(coop.alpha_omega) / gains.gamma_omega
        }
        _ => base,
    }
}

/// Closed-form time derivative of [`lyapunov`] along the closed loop, given
/// the desired relative twist. Adaptive modes give
/// `−(k_p + |p̃ᵀṗ_r|)(α_p − 0.5)² − p̃ᵀK_p p̃ − k_ω(α_ω − 0.5)² − ε̃ᵀK_ω ε̃`;
/// fixed-split modes keep the uncancelled leak term.
pub fn lyapunov_rate(
    err: &AbsoluteError,
    v_r_d: &Twist,
    coop: &CooperationState,
    gains: &Gains,
    mode: &CooperationMode,
) -> f64 {
    let p = err.p_tilde;
    let e = err.q_tilde.eps;
    let pos = p.dot(&gains.k_p_mat.component_mul(&p));
    let ori = e.dot(&gains.k_omega_mat.component_mul(&e));
    match mode {
        CooperationMode::Asymmetric | CooperationMode::Barrier => {
            let coupling = p.dot(&v_r_d.lin);
            -(gains.k_p_damp + coupling.abs()) * (coop.alpha_p - 0.5).powi(2)
                - pos
                - gains.k_omega_damp * (coop.alpha_omega - 0.5).powi(2)
                - ori
        }
        CooperationMode::Compensating => -pos - ori,
        CooperationMode::Symmetric | CooperationMode::Constant { .. } => {
            -pos - ori
                - (coop.alpha_p - 0.5) * p.dot(&v_r_d.lin)
                - (coop.alpha_omega - 0.5) * e.dot(&v_r_d.ang)
        }
    }
}
