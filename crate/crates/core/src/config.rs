//! Scenario configuration files and the built-in presets.
//!
//! A configuration is a flat TOML document:
//!
//! ```toml
//! scenario = "pose6dof"        # one_dim | planar | pose6dof
//! mode = "barrier"             # symmetric | constant[:a_p[,a_w]] | asymmetric | barrier | compensating
//! alpha_p0 = 0.5               # default 0.5
//! alpha_omega0 = 0.5           # default 0.5
//! p1 = [1.0, 0.0, -0.2]        # up to 3 components, missing ones are 0
//! p2 = [0.0, 0.2, 0.25]
//! q1 = [0.9, 0.261, 0.0, 0.348]   # [w, x, y, z], normalized on load; default identity
//! q2 = [0.9, -0.195, -0.389, 0.0]
//! target_p = [0.0, 0.0, 0.0]
//! target_q = [0.921, 0.275, 0.0, 0.275]
//! dt = 1e-3                    # default 1e-3 s
//! horizon = 10.0               # default 10 s
//! record_stride = 10           # default 10
//! threshold = 0.01             # optional, |p̃| threshold for time-to-threshold
//! gains.k_p_mat = 1.0          # scalar or 3 diagonal entries, default 1
//! gains.k_omega_mat = 1.0      # scalar or 3 diagonal entries, default 1
//! gains.k_r_mat = 1.0          # scalar or 6 diagonal entries, default 1
//! gains.gamma_p = 100.0        # default 100
//! gains.gamma_omega = 100.0    # default 100
//! gains.k_p_damp = 0.25        # default 0.25
//! gains.k_omega_damp = 0.25    # default 0.25
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use log::info;
use serde::Deserialize;
use thiserror::Error;

use crate::control::{CooperationMode, Gains};
use crate::so3::{Quaternion, Vec3};
use crate::sim::{Scenario, ScenarioConfig};
use crate::task_space::{CooperationState, Pose};

pub const PRESET_NAMES: [&str; 3] = ["paper-1d", "paper-planar", "paper-6dof"];

const PAPER_1D: &str = r#"
scenario = "one_dim"
mode = "symmetric"
p1 = [0.0]
p2 = [1.0]
target_p = [3.0]
gains.gamma_p = 100.0
gains.k_p_damp = 0.25
gains.k_p_mat = 1.0
"#;

const PAPER_PLANAR: &str = r#"
scenario = "planar"
mode = "symmetric"
p1 = [0.0, 0.0]
p2 = [1.0, 0.0]
target_p = [-0.1, 0.1]
gains.gamma_p = 100.0
gains.k_p_damp = 0.25
gains.k_p_mat = 1.0
"#;

const PAPER_6DOF: &str = r#"
scenario = "pose6dof"
mode = "symmetric"
p1 = [1.0, 0.0, -0.2]
p2 = [0.0, 0.2, 0.25]
q1 = [0.9, 0.261, 0.0, 0.348]
q2 = [0.9, -0.195, -0.389, 0.0]
target_p = [0.0, 0.0, 0.0]
target_q = [0.921, 0.275, 0.0, 0.275]
gains.gamma_p = 100.0
gains.gamma_omega = 100.0
gains.k_p_damp = 0.25
gains.k_omega_damp = 0.25
gains.k_p_mat = 1.0
gains.k_omega_mat = 1.0
gains.k_r_mat = 1.0
"#;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Schema { key: String, message: String },
    #[error("unknown preset `{0}` (available: paper-1d, paper-planar, paper-6dof)")]
    UnknownPreset(String),
}

fn schema(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Diagonal {
    Scalar(f64),
    Entries(Vec<f64>),
}

impl Diagonal {
    fn expand<const N: usize>(&self, key: &str) -> Result<[f64; N], ConfigError> {
        match self {
            Diagonal::Scalar(v) => Ok([*v; N]),
            Diagonal::Entries(v) if v.len() == N => Ok(std::array::from_fn(|i| v[i])),
            Diagonal::Entries(v) => Err(schema(
                key,
                format!("expected a scalar or {N} entries, got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_p_mat: Option<Diagonal>,
    k_omega_mat: Option<Diagonal>,
    k_r_mat: Option<Diagonal>,
    gamma_p: Option<f64>,
    gamma_omega: Option<f64>,
    k_p_damp: Option<f64>,
    k_omega_damp: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    mode: Option<String>,
    alpha_p0: Option<f64>,
    alpha_omega0: Option<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    q1: Option<Vec<f64>>,
    q2: Option<Vec<f64>>,
    target_p: Vec<f64>,
    target_q: Option<Vec<f64>>,
    #[serde(default)]
    gains: RawGains,
    dt: Option<f64>,
    horizon: Option<f64>,
    record_stride: Option<i64>,
    threshold: Option<f64>,
}

fn parse_scenario(s: &str) -> Result<Scenario, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "one_dim" | "onedim" | "1d" => Ok(Scenario::OneDim),
        "planar" | "2d" => Ok(Scenario::Planar),
        "pose6dof" | "pose_6dof" | "6dof" => Ok(Scenario::Pose6Dof),
        _ => Err(schema(
            "scenario",
            format!("expected one_dim, planar or pose6dof, got `{s}`"),
        )),
    }
}

fn position(key: &str, v: &[f64]) -> Result<Vec3, ConfigError> {
    if v.is_empty() || v.len() > 3 {
        return Err(schema(key, format!("expected 1 to 3 components, got {}", v.len())));
    }
    if !v.iter().all(|c| c.is_finite()) {
        return Err(schema(key, "components must be finite"));
    }
    let mut p = Vec3::zeros();
    p.as_mut_slice()[..v.len()].copy_from_slice(v);
    Ok(p)
}

fn quaternion(key: &str, v: Option<&[f64]>) -> Result<Quaternion, ConfigError> {
    let Some(v) = v else {
        return Ok(Quaternion::identity());
    };
    let [w, x, y, z] = v else {
        return Err(schema(key, format!("expected [w, x, y, z], got {} components", v.len())));
    };
    let q = Quaternion::from_wxyz(*w, *x, *y, *z);
    let n = q.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(schema(key, "quaternion must have a finite non-zero norm"));
    }
    if (n - 1.0).abs() > 1e-12 {
        info!("{key}: normalized quaternion {q} (norm {n}, factor {})", 1.0 / n);
    }
    Ok(q.normalized())
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(key, format!("must be non-negative, got {v}")))
    }
}

fn positive_diagonal<const N: usize>(
    key: &str,
    raw: Option<&Diagonal>,
) -> Result<Option<[f64; N]>, ConfigError> {
    raw.map(|d| {
        let entries = d.expand::<N>(key)?;
        for v in entries {
            positive(key, v)?;
        }
        Ok(entries)
    })
    .transpose()
}

fn build_gains(raw: &RawGains) -> Result<Gains, ConfigError> {
    let mut g = Gains::default();
    if let Some(k) = positive_diagonal::<3>("gains.k_p_mat", raw.k_p_mat.as_ref())? {
        g.k_p_mat = Vec3::from(k);
    }
    if let Some(k) = positive_diagonal::<3>("gains.k_omega_mat", raw.k_omega_mat.as_ref())? {
        g.k_omega_mat = Vec3::from(k);
    }
    if let Some(k) = positive_diagonal::<6>("gains.k_r_mat", raw.k_r_mat.as_ref())? {
        g.k_r_mat = k;
    }
    if let Some(v) = raw.gamma_p {
        g.gamma_p = positive("gains.gamma_p", v)?;
    }
    if let Some(v) = raw.gamma_omega {
        g.gamma_omega = positive("gains.gamma_omega", v)?;
    }
    if let Some(v) = raw.k_p_damp {
        g.k_p_damp = non_negative("gains.k_p_damp", v)?;
    }
    if let Some(v) = raw.k_omega_damp {
        g.k_omega_damp = non_negative("gains.k_omega_damp", v)?;
    }
    Ok(g)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let scenario = parse_scenario(&raw.scenario)?;
    let mode = match raw.mode.as_deref() {
        None => CooperationMode::Symmetric,
        Some(m) => m
            .parse::<CooperationMode>()
            .map_err(|e| schema("mode", e.to_string()))?,
    };
    let h1 = Pose::new(position("p1", &raw.p1)?, quaternion("q1", raw.q1.as_deref())?);
    let h2 = Pose::new(position("p2", &raw.p2)?, quaternion("q2", raw.q2.as_deref())?);
    let target = Pose::new(
        position("target_p", &raw.target_p)?,
        quaternion("target_q", raw.target_q.as_deref())?,
    );

    let mut cfg = ScenarioConfig::new(scenario, mode, h1, h2, target);
    cfg.gains = build_gains(&raw.gains)?;
    cfg.coop0 = CooperationState::new(
        raw.alpha_p0.unwrap_or(0.5),
        raw.alpha_omega0.unwrap_or(0.5),
    );
    for (key, v) in [("alpha_p0", cfg.coop0.alpha_p), ("alpha_omega0", cfg.coop0.alpha_omega)] {
        if !v.is_finite() {
            return Err(schema(key, "must be finite"));
        }
        if mode.uses_barrier() && !(v > 0.0 && v < 1.0) {
            return Err(schema(key, format!("barrier mode needs a value in (0, 1), got {v}")));
        }
    }
    if let Some(dt) = raw.dt {
        cfg.dt = positive("dt", dt)?;
    }
    if let Some(h) = raw.horizon {
        cfg.horizon = positive("horizon", h)?;
        if cfg.horizon < cfg.dt {
            return Err(schema("horizon", format!("must be at least dt = {}", cfg.dt)));
        }
    }
    if let Some(s) = raw.record_stride {
        if s < 1 {
            return Err(schema("record_stride", format!("must be at least 1, got {s}")));
        }
        cfg.record_stride = s as usize;
    }
    if let Some(th) = raw.threshold {
        cfg.threshold = Some(positive("threshold", th)?);
    }

    if !scenario.has_orientation() {
        for (key, q) in [("q1", h1.q), ("q2", h2.q), ("target_q", target.q)] {
            if q != Quaternion::identity() {
                return Err(schema(key, format!("must be identity in the {scenario} scenario")));
            }
        }
    }
    let dims = match scenario {
        Scenario::OneDim => 1,
        Scenario::Planar => 2,
        Scenario::Pose6Dof => 3,
    };
    for (key, p) in [("p1", h1.p), ("p2", h2.p), ("target_p", target.p)] {
        if p.iter().skip(dims).any(|c| *c != 0.0) {
            return Err(schema(
                key,
                format!("the {scenario} scenario allows {dims} non-zero components"),
            ));
        }
    }
    cfg.validate()
        .map_err(|e| schema("config", e.to_string()))?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Built-in experiment setups: `paper-1d`, `paper-planar`, `paper-6dof`.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = match name {
        "paper-1d" => PAPER_1D,
        "paper-planar" => PAPER_PLANAR,
        "paper-6dof" => PAPER_6DOF,
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    parse_config_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_the_experiments() {
        let c = preset("paper-1d").unwrap();
        assert_eq!(c.scenario, Scenario::OneDim);
        assert_eq!(c.h1.p, Vec3::zeros());
        assert_eq!(c.h2.p, Vec3::x());
        assert_eq!(c.target.p, Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(c.gains.gamma_p, 100.0);
        assert_eq!(c.gains.k_p_damp, 0.25);
        assert_eq!(c.gains.k_p_mat, Vec3::repeat(1.0));
        assert_eq!(c.coop0, CooperationState::SYMMETRIC);
        assert_eq!((c.dt, c.horizon, c.record_stride), (1e-3, 10.0, 10));

        let c = preset("paper-planar").unwrap();
        assert_eq!(c.scenario, Scenario::Planar);
        assert_eq!(c.h2.p, Vec3::x());
        assert_eq!(c.target.p, Vec3::new(-0.1, 0.1, 0.0));

        let c = preset("paper-6dof").unwrap();
        assert_eq!(c.scenario, Scenario::Pose6Dof);
        assert_eq!(c.h1.p, Vec3::new(1.0, 0.0, -0.2));
        assert_eq!(c.h2.p, Vec3::new(0.0, 0.2, 0.25));
        for q in [c.h1.q, c.h2.q, c.target.q] {
            assert!((q.norm() - 1.0).abs() < 1e-15);
        }
        let printed = Quaternion::from_wxyz(0.9, 0.261, 0.0, 0.348);
        assert!((c.h1.q.dot(&printed) / printed.norm() - 1.0).abs() < 1e-15);
        assert_eq!(c.gains, Gains::default());
        assert!(matches!(preset("paper-7d"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = format!("{PAPER_1D}\nspeed = 3\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("speed"), "{err}");
        let text = format!("{PAPER_1D}\ngains.k_i = 3\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("k_i"), "{err}");
    }

    #[test]
    fn schema_violations_name_the_key() {
        let cases = [
            ("dt = 0.0", "dt"),
            ("dt = -1e-3", "dt"),
            ("gains.gamma_omega = 0.0", "gains.gamma_omega"),
            ("gains.k_r_mat = [1.0, 1.0]", "gains.k_r_mat"),
            ("gains.k_omega_mat = [1.0, -1.0, 1.0]", "gains.k_omega_mat"),
            ("record_stride = 0", "record_stride"),
            ("horizon = 1e-5", "horizon"),
            ("q1 = [0.0, 0.0, 0.0, 0.0]", "q1"),
        ];
        for (line, key) in cases {
            let text = format!("{PAPER_1D}\n{line}\n");
            match parse_config_str(&text) {
                Err(ConfigError::Schema { key: k, .. }) => assert_eq!(k, key, "{line}"),
                other => panic!("{line}: {other:?}"),
            }
        }
        let text = PAPER_1D.replace("p2 = [1.0]", "p2 = [1.0, 0.5]");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::Schema { key, .. }) if key == "p2"
        ));
        let text = PAPER_1D.replace("mode = \"symmetric\"", "mode = \"barrier\"\nalpha_p0 = 1.0");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::Schema { key, .. }) if key == "alpha_p0"
        ));
        let text = PAPER_1D.replace("one_dim", "three_dim");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::Schema { key, .. }) if key == "scenario"
        ));
        assert!(matches!(parse_config_str("scenario = "), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn defaults_and_overrides() {
        let text = r#"
scenario = "planar"
mode = "constant:0.8"
p1 = [0.0, 1.0]
p2 = [2.0]
target_p = [0.0]
horizon = 2.0
threshold = 0.05
gains.k_p_mat = [2.0, 3.0, 4.0]
"#;
        let c = parse_config_str(text).unwrap();
        assert_eq!(
            c.mode,
            CooperationMode::Constant {
                alpha_p: 0.8,
                alpha_omega: 0.8
            }
        );
        assert_eq!(c.h1.p, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.horizon, 2.0);
        assert_eq!(c.threshold, Some(0.05));
        assert_eq!(c.gains.k_p_mat, Vec3::new(2.0, 3.0, 4.0));
        assert_eq!(c.gains.gamma_omega, 100.0);
    }

    #[test]
    fn missing_file() {
        let err = parse_config("/nonexistent/coop.toml").unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }
}
