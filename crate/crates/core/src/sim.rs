//! Closed-loop propagation of the dual-arm system.
//!
//! Each evaluation computes the absolute error, the desired absolute and
//! relative twists, the cooperation-parameter rates, and resolves the twists
//! to the two end effectors. Positions, quaternions and cooperation
//! parameters are integrated together by a fixed-step classical RK4.
//! Quaternions follow `q̇ = ½ {0, ω} q` with world-frame `ω`.

use std::fmt;

use log::warn;

use crate::control::{
    absolute_errors, alpha_omega_rate, alpha_p_rate, compensating_orientation_law,
    compensating_position_law, lyapunov, orientation_law, position_law, relative_point_law,
    relative_pose_law, AbsoluteError, CooperationMode, Gains,
};
use crate::error::{Error, Result};
use crate::so3::{Quaternion, Vec3};
use crate::task_space::{
    absolute_frame, absolute_twist_effect, ects_resolve, CooperationState, Pose, Twist,
};

/// Smallest and largest values a barrier-mode cooperation parameter is
/// allowed to take. A step that lands outside the open interval (0, 1) is
/// pulled back to these and counted as a clamp event.
pub const BARRIER_BOUNDS: (f64, f64) = (f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);

const STATE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two points on the x axis; angular channel off.
    OneDim,
    /// Two points in the x-y plane; angular channel off.
    Planar,
    /// Full position and orientation of both end effectors.
    Pose6Dof,
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::OneDim => "one_dim",
            Scenario::Planar => "planar",
            Scenario::Pose6Dof => "pose6dof",
        }
    }

    pub fn has_orientation(&self) -> bool {
        matches!(self, Scenario::Pose6Dof)
    }

    /// Number of leading position coordinates that may be non-zero.
    fn position_dims(&self) -> usize {
        match self {
            Scenario::OneDim => 1,
            Scenario::Planar => 2,
            Scenario::Pose6Dof => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub h1: Pose,
    pub h2: Pose,
    pub coop: CooperationState,
    pub t: f64,
}

impl SystemState {
    fn to_array(self) -> [f64; STATE_LEN] {
        let [q1w, q1x, q1y, q1z] = self.h1.q.to_wxyz();
        let [q2w, q2x, q2y, q2z] = self.h2.q.to_wxyz();
        [
            self.h1.p.x,
            self.h1.p.y,
            self.h1.p.z,
            q1w,
            q1x,
            q1y,
            q1z,
            self.h2.p.x,
            self.h2.p.y,
            self.h2.p.z,
            q2w,
            q2x,
            q2y,
            q2z,
            self.coop.alpha_p,
            self.coop.alpha_omega,
        ]
    }

    fn from_array(y: &[f64; STATE_LEN], t: f64) -> Self {
        Self {
            h1: Pose::new(
                Vec3::new(y[0], y[1], y[2]),
                Quaternion::from_wxyz(y[3], y[4], y[5], y[6]),
            ),
            h2: Pose::new(
                Vec3::new(y[7], y[8], y[9]),
                Quaternion::from_wxyz(y[10], y[11], y[12], y[13]),
            ),
            coop: CooperationState::new(y[14], y[15]),
            t,
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Time derivative of [`SystemState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub p1_dot: Vec3,
    pub q1_dot: Quaternion,
    pub p2_dot: Vec3,
    pub q2_dot: Quaternion,
    pub alpha_p_dot: f64,
    pub alpha_omega_dot: f64,
}

impl StateRate {
    fn to_array(self) -> [f64; STATE_LEN] {
        let s = SystemState {
            h1: Pose::new(self.p1_dot, self.q1_dot),
            h2: Pose::new(self.p2_dot, self.q2_dot),
            coop: CooperationState::new(self.alpha_p_dot, self.alpha_omega_dot),
            t: 0.0,
        };
        s.to_array()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub mode: CooperationMode,
    pub h1: Pose,
    pub h2: Pose,
    /// Initial cooperation parameters. Symmetric and Constant modes override
    /// them with their fixed split.
    pub coop0: CooperationState,
    pub target: Pose,
    pub gains: Gains,
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    /// Absolute threshold on `|p̃|` for the time-to-threshold metric; 1% of
    /// the initial error when absent.
    pub threshold: Option<f64>,
}

impl ScenarioConfig {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_HORIZON: f64 = 10.0;
    pub const DEFAULT_STRIDE: usize = 10;

    pub fn new(scenario: Scenario, mode: CooperationMode, h1: Pose, h2: Pose, target: Pose) -> Self {
        Self {
            scenario,
            mode,
            h1,
            h2,
            coop0: CooperationState::SYMMETRIC,
            target,
            gains: Gains::default(),
            dt: Self::DEFAULT_DT,
            horizon: Self::DEFAULT_HORIZON,
            record_stride: Self::DEFAULT_STRIDE,
            threshold: None,
        }
    }

    pub fn with_mode(&self, mode: CooperationMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return invalid(format!(
                "horizon must be at least dt ({}), got {}",
                self.dt, self.horizon
            ));
        }
        if self.record_stride == 0 {
            return invalid("record_stride must be at least 1".into());
        }
        if let Some(th) = self.threshold {
            if !(th > 0.0 && th.is_finite()) {
                return invalid(format!("threshold must be positive, got {th}"));
            }
        }
        self.gains.validate()?;

        for (name, pose) in [("h1", &self.h1), ("h2", &self.h2), ("target", &self.target)] {
            if !pose.p.iter().all(|c| c.is_finite()) || !pose.q.is_finite() {
                return invalid(format!("{name} pose is not finite"));
            }
            if (pose.q.norm() - 1.0).abs() > 1e-9 {
                return invalid(format!(
                    "{name} quaternion is not unit (norm {})",
                    pose.q.norm()
                ));
            }
            let dims = self.scenario.position_dims();
            if pose.p.iter().skip(dims).any(|c| *c != 0.0) {
                return invalid(format!(
                    "{name} position leaves the {} subspace",
                    self.scenario
                ));
            }
            if !self.scenario.has_orientation() && pose.q != Quaternion::identity() {
                return invalid(format!(
                    "{name} orientation must be identity in the {} scenario",
                    self.scenario
                ));
            }
        }

        let coop = self.initial_coop();
        if !(coop.alpha_p.is_finite() && coop.alpha_omega.is_finite()) {
            return invalid("cooperation parameters must be finite".into());
        }
        if self.mode.uses_barrier() {
            for (name, v) in [("alpha_p0", coop.alpha_p), ("alpha_omega0", coop.alpha_omega)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::BarrierDomain {
                        name: if name == "alpha_p0" { "alpha_p" } else { "alpha_omega" },
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of integration steps covering the horizon.
    pub fn step_count(&self) -> usize {
        whole_count(self.horizon / self.dt)
    }

    /// Number of recorded samples, including the initial one.
    pub fn sample_count(&self) -> usize {
        whole_count(self.horizon / (self.dt * self.record_stride as f64)) + 1
    }

    pub fn initial_coop(&self) -> CooperationState {
        match self.mode {
            CooperationMode::Symmetric => CooperationState::SYMMETRIC,
            CooperationMode::Constant {
                alpha_p,
                alpha_omega,
            } => CooperationState::new(alpha_p, alpha_omega),
            _ => self.coop0,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState {
            h1: self.h1,
            h2: self.h2,
            coop: self.initial_coop(),
            t: 0.0,
        }
    }
}

/// `floor(x)`, treating values within 1e-9 (relative) of an integer as that
/// integer so that e.g. `10 / 1e-3` counts 10000 steps.
fn whole_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// Everything the controller computes for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub error: AbsoluteError,
    pub v_a_d: Twist,
    pub v_r_d: Twist,
    pub v1: Twist,
    pub v2: Twist,
    /// Absolute twist realized by the resolved end-effector twists.
    pub v_a: Twist,
    pub alpha_p_dot: f64,
    pub alpha_omega_dot: f64,
}

pub fn evaluate(state: &SystemState, cfg: &ScenarioConfig) -> Result<Evaluation> {
    let h1 = Pose::new(state.h1.p, state.h1.q.normalized());
    let h2 = Pose::new(state.h2.p, state.h2.q.normalized());
    let coop = state.coop;
    let gains = &cfg.gains;
    let error = absolute_errors(&cfg.target, &h1, &h2)?;
    let oriented = cfg.scenario.has_orientation();

    let v_r_d = if oriented {
        relative_pose_law(&h1, &h2, gains)
    } else {
        Twist::linear(relative_point_law(&h1.p, &h2.p))
    };

    let v_a_d = match cfg.mode {
        CooperationMode::Compensating => Twist::new(
            compensating_position_law(&error, &v_r_d.lin, coop.alpha_p, gains),
            compensating_orientation_law(&error, &v_r_d.ang, coop.alpha_omega, gains),
        ),
        _ => Twist::new(position_law(&error, gains), orientation_law(&error, gains)),
    };
    let v_a_d = if oriented {
        v_a_d
    } else {
        Twist::linear(v_a_d.lin)
    };

    let (alpha_p_dot, alpha_omega_dot) = if cfg.mode.is_adaptive() {
        let barrier = cfg.mode.uses_barrier();
        let ap = alpha_p_rate(&error, &v_r_d.lin, coop.alpha_p, gains, barrier)?;
        let aw = if oriented {
            alpha_omega_rate(&error, &v_r_d.ang, coop.alpha_omega, gains, barrier)?
        } else {
            0.0
        };
        (ap, aw)
    } else {
        (0.0, 0.0)
    };

    let (v1, v2) = ects_resolve(&v_a_d, &v_r_d, &coop);
    Ok(Evaluation {
        error,
        v_a_d,
        v_r_d,
        v1,
        v2,
        v_a: absolute_twist_effect(&v_a_d, &v_r_d, &coop),
        alpha_p_dot,
        alpha_omega_dot,
    })
}

/// `½ {0, ω} q`.
fn quat_rate(omega: &Vec3, q: &Quaternion) -> Quaternion {
    let half = Quaternion::new(0.0, omega * 0.5);
    half * *q
}

pub fn derivatives(state: &SystemState, cfg: &ScenarioConfig) -> Result<StateRate> {
    let ev = evaluate(state, cfg)?;
    Ok(StateRate {
        p1_dot: ev.v1.lin,
        q1_dot: quat_rate(&ev.v1.ang, &state.h1.q),
        p2_dot: ev.v2.lin,
        q2_dot: quat_rate(&ev.v2.ang, &state.h2.q),
        alpha_p_dot: ev.alpha_p_dot,
        alpha_omega_dot: ev.alpha_omega_dot,
    })
}

/// One classical fourth-order Runge-Kutta step of `ẏ = f(y)`.
pub fn rk4<const N: usize, E>(
    y: &[f64; N],
    h: f64,
    mut f: impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
) -> Result<[f64; N], E> {
    let offset = |k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = f(y)?;
    let k2 = f(&offset(&k1, 0.5 * h))?;
    let k3 = f(&offset(&k2, 0.5 * h))?;
    let k4 = f(&offset(&k3, h))?;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: SystemState,
    /// Cooperation parameters pulled back inside the barrier domain.
    pub clamp_events: u32,
}

pub fn rk4_step(state: &SystemState, cfg: &ScenarioConfig) -> Result<Step> {
    let t_next = state.t + cfg.dt;
    let y = rk4(&state.to_array(), cfg.dt, |y| {
        let stage = SystemState::from_array(y, state.t);
        if !stage.is_finite() {
            return Err(Error::Diverged { t: state.t });
        }
        let rate = derivatives(&stage, cfg)?.to_array();
        if rate.iter().all(|v| v.is_finite()) {
            Ok(rate)
        } else {
            Err(Error::Diverged { t: state.t })
        }
    })?;

    let mut next = SystemState::from_array(&y, t_next);
    if !next.is_finite() {
        return Err(Error::Diverged { t: t_next });
    }
    next.h1.q = next.h1.q.normalized();
    next.h2.q = next.h2.q.normalized();

    let mut clamp_events = 0;
    if cfg.mode.uses_barrier() {
        for alpha in [&mut next.coop.alpha_p, &mut next.coop.alpha_omega] {
            let clamped = alpha.clamp(BARRIER_BOUNDS.0, BARRIER_BOUNDS.1);
            if clamped != *alpha {
                warn!("t = {t_next}: barrier clamp moved cooperation parameter {alpha} -> {clamped}");
                *alpha = clamped;
                clamp_events += 1;
            }
        }
    }
    Ok(Step {
        state: next,
        clamp_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: SystemState,
    pub absolute: Pose,
    pub error: AbsoluteError,
    /// Realized absolute twist.
    pub v_a: Twist,
    /// Desired (and realized) relative twist.
    pub v_r: Twist,
    pub lyapunov: f64,
    /// Clamp events accumulated up to this sample.
    pub clamp_events: u32,
}

impl Sample {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// `(t, f(sample))` pairs.
    pub fn series(&self, f: impl Fn(&Sample) -> f64) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t(), f(s))).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t() - t).abs().total_cmp(&(b.t() - t).abs()))
            .expect("non-empty trajectory")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub position: f64,
    pub eps: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub threshold: f64,
    pub time_to_threshold: Option<f64>,
    pub fitted_rate_lambda: Option<f64>,
    pub final_error_norms: ErrorNorms,
    pub final_alphas: CooperationState,
    /// Largest increase of the Lyapunov function between consecutive
    /// samples; 0 when it never increases.
    pub max_lyapunov_increase: f64,
    pub alpha_p_range: (f64, f64),
    pub alpha_omega_range: (f64, f64),
    pub clamp_events: u32,
}

fn sample(state: &SystemState, cfg: &ScenarioConfig, clamp_events: u32) -> Result<Sample> {
    let ev = evaluate(state, cfg)?;
    let absolute = absolute_frame(
        &Pose::new(state.h1.p, state.h1.q.normalized()),
        &Pose::new(state.h2.p, state.h2.q.normalized()),
    )?;
    Ok(Sample {
        state: *state,
        absolute,
        error: ev.error,
        v_a: ev.v_a,
        v_r: ev.v_r_d,
        lyapunov: lyapunov(&ev.error, &state.coop, &cfg.gains, &cfg.mode),
        clamp_events,
    })
}

/// Integrates `cfg` from `t = 0` to the horizon. Identical configurations
/// produce bit-identical trajectories.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Trajectory, RunMetrics)> {
    cfg.validate()?;
    let steps = cfg.step_count();
    let mut state = cfg.initial_state();
    let mut clamp_events = 0;
    let mut samples = Vec::with_capacity(cfg.sample_count());
    samples.push(sample(&state, cfg, 0)?);
    for k in 1..=steps {
        let step = rk4_step(&state, cfg)?;
        state = step.state;
        state.t = k as f64 * cfg.dt;
        clamp_events += step.clamp_events;
        if k % cfg.record_stride == 0 {
            samples.push(sample(&state, cfg, clamp_events)?);
        }
    }
    let trajectory = Trajectory { samples };
    let metrics = compute_metrics(&trajectory, cfg);
    Ok((trajectory, metrics))
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

pub fn compute_metrics(trajectory: &Trajectory, cfg: &ScenarioConfig) -> RunMetrics {
    let err_norm = trajectory.series(|s| s.error.p_tilde.norm());
    let threshold = cfg.threshold.unwrap_or(0.01 * err_norm[0].1);
    let time_to_threshold = if threshold > 0.0 {
        time_to_threshold(&err_norm, threshold)
    } else {
        Some(0.0)
    };
    let lyap = trajectory.series(|s| s.lyapunov);
    let last = trajectory.last();
    let max_lyapunov_increase = lyap
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(0.0, f64::max);
    RunMetrics {
        threshold,
        time_to_threshold,
        fitted_rate_lambda: fit_exponential_rate(&lyap).ok(),
        final_error_norms: ErrorNorms {
            position: last.error.p_tilde.norm(),
            eps: last.error.q_tilde.eps.norm(),
            angle: last.error.angle(),
        },
        final_alphas: last.state.coop,
        max_lyapunov_increase,
        alpha_p_range: range(trajectory.samples.iter().map(|s| s.state.coop.alpha_p)),
        alpha_omega_range: range(trajectory.samples.iter().map(|s| s.state.coop.alpha_omega)),
        clamp_events: last.clamp_events,
    }
}

/// Empirical exponential rate `λ` of a decaying positive series: minus the
/// least-squares slope of `ln v` against `t`, over the leading samples whose
/// value stays within `[1e-6 v₀, v₀]`.
pub fn fit_exponential_rate(series: &[(f64, f64)]) -> Result<f64> {
    let v0 = match series.first() {
        Some(&(_, v)) if v > 0.0 && v.is_finite() => v,
        _ => {
            return Err(Error::InsufficientData(
                "series must start with a positive value".into(),
            ))
        }
    };
    let window: Vec<(f64, f64)> = series
        .iter()
        .take_while(|(_, v)| *v >= 1e-6 * v0 && *v <= v0)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if window.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} qualifying samples, need at least 3",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let t_mean = window.iter().map(|(t, _)| t).sum::<f64>() / n;
    let y_mean = window.iter().map(|(_, y)| y).sum::<f64>() / n;
    let (sxy, sxx) = window.iter().fold((0.0, 0.0), |(sxy, sxx), (t, y)| {
        let dt = t - t_mean;
        (sxy + dt * (y - y_mean), sxx + dt * dt)
    });
    Ok(-sxy / sxx)
}

/// First time the series drops to or below `threshold`, linearly
/// interpolated between samples. `None` when it never does.
pub fn time_to_threshold(series: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let (t0, v0) = *series.first()?;
    if v0 <= threshold {
        return Some(t0);
    }
    series.windows(2).find_map(|w| {
        let ((ta, va), (tb, vb)) = (w[0], w[1]);
        (vb <= threshold).then(|| ta + (va - threshold) / (va - vb) * (tb - ta))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{angle_axis_to_quat, AngleAxis};

    fn paper_1d(mode: CooperationMode) -> ScenarioConfig {
        ScenarioConfig::new(
            Scenario::OneDim,
            mode,
            Pose::from_position(Vec3::zeros()),
            Pose::from_position(Vec3::x()),
            Pose::from_position(Vec3::new(3.0, 0.0, 0.0)),
        )
    }

    #[test]
    fn derivatives_at_the_initial_1d_state() {
        let cfg = paper_1d(CooperationMode::Symmetric);
        let r = derivatives(&cfg.initial_state(), &cfg).unwrap();
        assert_eq!(r.p1_dot, Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(r.p2_dot, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(r.alpha_p_dot, 0.0);

        let cfg = paper_1d(CooperationMode::Asymmetric);
        let r = derivatives(&cfg.initial_state(), &cfg).unwrap();
        assert_eq!(r.p1_dot, Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(r.alpha_p_dot, -250.0);
    }

    #[test]
    fn equilibrium_is_at_rest() {
        let q = angle_axis_to_quat(&AngleAxis::new(0.7, Vec3::new(1.0, 2.0, 2.0) / 3.0)).unwrap();
        let h = Pose::new(Vec3::new(0.1, -0.3, 0.2), q);
        for mode in [
            CooperationMode::Symmetric,
            CooperationMode::Asymmetric,
            CooperationMode::Barrier,
            CooperationMode::Compensating,
        ] {
            let cfg = ScenarioConfig::new(Scenario::Pose6Dof, mode, h, h, h);
            let r = derivatives(&cfg.initial_state(), &cfg).unwrap();
            let all = r.to_array();
            assert!(all.iter().all(|v| v.abs() < 1e-15), "{mode}: {all:?}");
        }
    }

    #[test]
    fn zero_rate_step_only_advances_time() {
        let h = Pose::from_position(Vec3::new(0.5, 0.0, 0.0));
        let cfg = ScenarioConfig::new(Scenario::OneDim, CooperationMode::Symmetric, h, h, h);
        let s0 = cfg.initial_state();
        let s1 = rk4_step(&s0, &cfg).unwrap().state;
        assert_eq!(s1.h1, s0.h1);
        assert_eq!(s1.h2, s0.h2);
        assert_eq!(s1.coop, s0.coop);
        assert_eq!(s1.t, cfg.dt);
    }

    #[test]
    fn rk4_pure_rotation() {
        let omega = Vec3::z();
        let mut q = [1.0, 0.0, 0.0, 0.0];
        for _ in 0..1000 {
            q = rk4::<4, ()>(&q, 1e-3, |y| {
                let r = quat_rate(&omega, &Quaternion::from_wxyz(y[0], y[1], y[2], y[3]));
                Ok(r.to_wxyz())
            })
            .unwrap();
            let n = Quaternion::from_wxyz(q[0], q[1], q[2], q[3]).normalized();
            q = n.to_wxyz();
        }
        let expected = [0.5f64.cos(), 0.0, 0.0, 0.5f64.sin()];
        for i in 0..4 {
            assert!((q[i] - expected[i]).abs() < 1e-9, "{q:?}");
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let solve = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            for _ in 0..n {
                y = rk4::<1, ()>(&y, h, |y| Ok([-y[0]])).unwrap();
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let (e1, e2) = (solve(10), solve(20));
        assert!(e1 < 1e-5);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn sample_counts() {
        let cfg = paper_1d(CooperationMode::Symmetric);
        assert_eq!(cfg.step_count(), 10_000);
        assert_eq!(cfg.sample_count(), 1001);
        let cfg = ScenarioConfig {
            horizon: 0.0255,
            dt: 1e-3,
            record_stride: 10,
            ..cfg
        };
        assert_eq!(cfg.step_count(), 25);
        assert_eq!(cfg.sample_count(), 3);
        let (traj, _) = run_scenario(&cfg).unwrap();
        assert_eq!(traj.samples.len(), 3);
        assert_eq!(traj.last().t(), 0.02);
    }

    #[test]
    fn config_validation() {
        let base = paper_1d(CooperationMode::Barrier);
        assert!(base.validate().is_ok());
        let bad = [
            ScenarioConfig { dt: 0.0, ..base.clone() },
            ScenarioConfig { horizon: 1e-4, ..base.clone() },
            ScenarioConfig { record_stride: 0, ..base.clone() },
            ScenarioConfig { coop0: CooperationState::new(1.0, 0.5), ..base.clone() },
            ScenarioConfig {
                h2: Pose::from_position(Vec3::new(1.0, 0.1, 0.0)),
                ..base.clone()
            },
            ScenarioConfig {
                target: Pose::new(Vec3::zeros(), Quaternion::from_wxyz(0.0, 1.0, 0.0, 0.0)),
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let planar = ScenarioConfig {
            scenario: Scenario::Planar,
            h2: Pose::from_position(Vec3::new(1.0, 0.1, 0.0)),
            ..base
        };
        assert!(planar.validate().is_ok());
    }

    #[test]
    fn fixed_modes_override_initial_alphas() {
        let cfg = ScenarioConfig {
            coop0: CooperationState::new(0.8, 0.7),
            ..paper_1d(CooperationMode::Symmetric)
        };
        assert_eq!(cfg.initial_coop(), CooperationState::SYMMETRIC);
        assert_eq!(
            cfg.with_mode(CooperationMode::MASTER_SLAVE).initial_coop(),
            CooperationState::new(1.0, 1.0)
        );
        assert_eq!(
            cfg.with_mode(CooperationMode::Compensating).initial_coop(),
            CooperationState::new(0.8, 0.7)
        );
    }

    #[test]
    fn fit_rate_examples() {
        let series: Vec<_> = (0..=1000)
            .map(|k| {
                let t = k as f64 * 0.01;
                (t, (-2.0 * t).exp())
            })
            .collect();
        assert!((fit_exponential_rate(&series).unwrap() - 2.0).abs() < 1e-6);

        let flat: Vec<_> = (0..10).map(|k| (k as f64, 4.0)).collect();
        assert!(fit_exponential_rate(&flat).unwrap().abs() < 1e-9);

        assert!(matches!(
            fit_exponential_rate(&[(0.0, 1.0), (1.0, 0.5)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(fit_exponential_rate(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let series: Vec<_> = (0..=300)
            .map(|k| {
                let t = k as f64 * 0.01;
                (t, (-t).exp())
            })
            .collect();
        let t = time_to_threshold(&series, (-1.0f64).exp()).unwrap();
        assert!((t - 1.0).abs() <= 0.01);
        assert_eq!(time_to_threshold(&series, 1e-3), None);
        assert_eq!(time_to_threshold(&series, 2.0), Some(0.0));
    }

    #[test]
    fn barrier_domain_error_propagates() {
        let cfg = paper_1d(CooperationMode::Barrier);
        let mut s = cfg.initial_state();
        s.coop.alpha_p = 1.5;
        assert!(matches!(
            rk4_step(&s, &cfg),
            Err(Error::BarrierDomain { name: "alpha_p", .. })
        ));
    }

    #[test]
    fn orientation_potential_decreases_along_error_direction() {
        // V_ω = 2(1 - η̃) must move at -ε̃ᵀω_a under q̇ = ½{0,ω}q, so rotating
        // the absolute frame along ε̃ decreases it.
        let q1 = angle_axis_to_quat(&AngleAxis::new(0.9, Vec3::new(0.0, 0.6, 0.8))).unwrap();
        let q2 = angle_axis_to_quat(&AngleAxis::new(-0.4, Vec3::x())).unwrap();
        let h1 = Pose::new(Vec3::zeros(), q1);
        let h2 = Pose::new(Vec3::zeros(), q2);
        let target = Pose::new(Vec3::zeros(), Quaternion::identity());
        let v = |h1: &Pose, h2: &Pose| {
            let e = absolute_errors(&target, h1, h2).unwrap();
            crate::control::v_orientation(&e)
        };
        let e0 = absolute_errors(&target, &h1, &h2).unwrap();
        let omega = Vec3::new(0.3, -0.2, 0.5);
        let h = 1e-6;
        let turn = |p: &Pose, s: f64| {
            let dq = quat_rate(&omega, &p.q);
            let q = Quaternion::new(p.q.eta + s * dq.eta, p.q.eps + dq.eps * s).normalized();
            Pose::new(p.p, q)
        };
        let fd = (v(&turn(&h1, h), &turn(&h2, h)) - v(&turn(&h1, -h), &turn(&h2, -h))) / (2.0 * h);
        let expected = -e0.eps_tilde().dot(&omega);
        assert!((fd - expected).abs() < 1e-8, "fd {fd}, expected {expected}");
    }

    #[test]
    fn analytic_lyapunov_rate_matches_finite_difference() {
        // Gentle adaptation keeps the third derivative small enough for a
        // one-step finite difference to resolve the rate.
        let q1 = angle_axis_to_quat(&AngleAxis::new(0.5, Vec3::new(1.0, 2.0, 2.0) / 3.0)).unwrap();
        let q2 = angle_axis_to_quat(&AngleAxis::new(-0.3, Vec3::y())).unwrap();
        for mode in [
            CooperationMode::Symmetric,
            CooperationMode::Asymmetric,
            CooperationMode::Barrier,
            CooperationMode::Compensating,
        ] {
            let mut cfg = ScenarioConfig::new(
                Scenario::Pose6Dof,
                mode,
                Pose::new(Vec3::new(0.2, 0.0, 0.1), q1),
                Pose::new(Vec3::new(-0.1, 0.3, 0.0), q2),
                Pose::new(Vec3::new(0.4, 0.1, -0.2), Quaternion::identity()),
            );
            cfg.gains.gamma_p = 1.0;
            cfg.gains.gamma_omega = 1.0;
            cfg.coop0 = CooperationState::new(0.6, 0.45);
            let s0 = cfg.initial_state();
            let v = |s: &SystemState| {
                let e = absolute_errors(
                    &cfg.target,
                    &Pose::new(s.h1.p, s.h1.q.normalized()),
                    &Pose::new(s.h2.p, s.h2.q.normalized()),
                )
                .unwrap();
                lyapunov(&e, &s.coop, &cfg.gains, &cfg.mode)
            };
            let ev = evaluate(&s0, &cfg).unwrap();
            let analytic = crate::control::lyapunov_rate(
                &ev.error,
                &ev.v_r_d,
                &s0.coop,
                &cfg.gains,
                &cfg.mode,
            );
            let s1 = rk4_step(&s0, &cfg).unwrap().state;
            let dt = cfg.dt;
            let fd = (v(&s1) - v(&s0)) / dt;
            assert!(analytic < 0.0, "{mode}: {analytic}");
            // forward difference: O(dt) bias bounded by V'' ~ 1
            assert!((fd - analytic).abs() < 10.0 * dt, "{mode}: fd {fd}, analytic {analytic}");
        }
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let mut cfg = paper_1d(CooperationMode::Symmetric);
        cfg.gains.k_p_mat = Vec3::repeat(1e300);
        cfg.target = Pose::from_position(Vec3::new(1e300, 0.0, 0.0));
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }
}
