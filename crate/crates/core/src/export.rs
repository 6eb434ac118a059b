//! Trajectory CSV and metrics summary documents.
//!
//! The CSV layout is fixed (schema version [`CSV_SCHEMA_VERSION`]): one
//! header row followed by one row per recorded sample, every value written
//! with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::sim::{RunMetrics, ScenarioConfig, Trajectory};

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 24] = [
    "t",
    "p1x",
    "p1y",
    "p1z",
    "q1w",
    "q1x",
    "q1y",
    "q1z",
    "p2x",
    "p2y",
    "p2z",
    "q2w",
    "q2x",
    "q2y",
    "q2z",
    "pax",
    "pay",
    "paz",
    "err_p_norm",
    "err_eps_norm",
    "theta_a",
    "alpha_p",
    "alpha_omega",
    "V",
];

fn push_value(out: &mut String, v: f64) {
    // {:.16e} is 17 significant digits and round-trips every f64.
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for s in &trajectory.samples {
        let st = &s.state;
        let row = [
            st.t,
            st.h1.p.x,
            st.h1.p.y,
            st.h1.p.z,
            st.h1.q.eta,
            st.h1.q.eps.x,
            st.h1.q.eps.y,
            st.h1.q.eps.z,
            st.h2.p.x,
            st.h2.p.y,
            st.h2.p.z,
            st.h2.q.eta,
            st.h2.q.eps.x,
            st.h2.q.eps.y,
            st.h2.q.eps.z,
            s.absolute.p.x,
            s.absolute.p.y,
            s.absolute.p.z,
            s.error.p_tilde.norm(),
            s.error.q_tilde.eps.norm(),
            s.error.angle(),
            st.coop.alpha_p,
            st.coop.alpha_omega,
            s.lyapunov,
        ];
        for (i, v) in row.into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_value(&mut out, v);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CsvError {
    #[error("unexpected CSV header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Parses a trajectory CSV back into rows of numbers, checking the header.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<[f64; 24]>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_COLUMNS.join(",") {
        return Err(CsvError::Header(header.to_string()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = i + 1;
            let values: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>().map_err(|e| CsvError::Row {
                        row,
                        message: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            values.try_into().map_err(|v: Vec<f64>| CsvError::Row {
                row,
                message: format!("expected 24 fields, got {}", v.len()),
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v:.16e}"))
}

/// Flat `key = value` summary of one run.
pub fn metrics_document(label: &str, cfg: &ScenarioConfig, m: &RunMetrics) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        writeln!(out, "{k} = {v}").expect("writing to a String cannot fail");
    };
    kv("run", label.to_string());
    kv("scenario", cfg.scenario.to_string());
    kv("mode", cfg.mode.to_string());
    kv("csv_schema", CSV_SCHEMA_VERSION.to_string());
    kv("dt", format!("{:e}", cfg.dt));
    kv("horizon", format!("{}", cfg.horizon));
    kv("record_stride", cfg.record_stride.to_string());
    kv("k_p_damp", format!("{}", cfg.gains.k_p_damp));
    kv("k_omega_damp", format!("{}", cfg.gains.k_omega_damp));
    kv("threshold", format!("{:.16e}", m.threshold));
    kv("time_to_threshold", opt(m.time_to_threshold));
    kv("fitted_rate_lambda", opt(m.fitted_rate_lambda));
    kv("final_err_p_norm", format!("{:.16e}", m.final_error_norms.position));
    kv("final_err_eps_norm", format!("{:.16e}", m.final_error_norms.eps));
    kv("final_theta_a", format!("{:.16e}", m.final_error_norms.angle));
    kv("final_alpha_p", format!("{:.16e}", m.final_alphas.alpha_p));
    kv("final_alpha_omega", format!("{:.16e}", m.final_alphas.alpha_omega));
    kv("alpha_p_min", format!("{:.16e}", m.alpha_p_range.0));
    kv("alpha_p_max", format!("{:.16e}", m.alpha_p_range.1));
    kv("alpha_omega_min", format!("{:.16e}", m.alpha_omega_range.0));
    kv("alpha_omega_max", format!("{:.16e}", m.alpha_omega_range.1));
    kv("max_lyapunov_increase", format!("{:.16e}", m.max_lyapunov_increase));
    kv("clamp_events", m.clamp_events.to_string());
    out
}

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(
        ".{}.{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::sim::run_scenario;

    #[test]
    fn csv_layout() {
        let mut cfg = preset("paper-6dof").unwrap();
        cfg.horizon = 0.5;
        let (traj, _) = run_scenario(&cfg).unwrap();
        let text = trajectory_csv(&traj);
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,p1x,p1y,p1z,q1w,q1x,q1y,q1z,p2x,"));
        assert!(header.ends_with(",q2z,pax,pay,paz,err_p_norm,err_eps_norm,theta_a,alpha_p,alpha_omega,V"));
        let rows = parse_trajectory_csv(&text).unwrap();
        assert_eq!(rows.len(), 51);
        // values survive the text round trip exactly
        assert_eq!(rows[7][0], traj.samples[7].t());
        assert_eq!(rows[7][4], traj.samples[7].state.h1.q.eta);
        assert_eq!(rows[50][23], traj.samples[50].lyapunov);
        let first_value = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
        let mantissa = first_value.split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }

    #[test]
    fn csv_parse_errors() {
        assert!(matches!(parse_trajectory_csv("a,b\n1,2\n"), Err(CsvError::Header(_))));
        let text = format!("{}\n1,2\n", CSV_COLUMNS.join(","));
        assert!(matches!(parse_trajectory_csv(&text), Err(CsvError::Row { row: 1, .. })));
    }

    #[test]
    fn metrics_document_is_flat_key_value() {
        let mut cfg = preset("paper-1d").unwrap();
        cfg.horizon = 1.0;
        let (_, m) = run_scenario(&cfg).unwrap();
        let doc = metrics_document("paper-1d_symmetric", &cfg, &m);
        for line in doc.lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            assert!(!k.is_empty() && !v.is_empty());
        }
        assert!(doc.contains("mode = symmetric\n"));
        assert!(doc.contains("clamp_events = 0\n"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
