//! `coopctl`: run the cooperative dual-arm scenarios and write trajectory
//! CSVs plus metrics summaries.
//!
//! ```text
//! coopctl run paper-1d --mode symmetric --out out
//! coopctl compare --preset paper-6dof
//! coopctl sweep paper-1d --kp 0,0.25,1,4 --mode asymmetric
//! ```
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when the
//! simulation diverges, 1 for anything else (I/O, ...).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use cts_core::export::{metrics_document, trajectory_csv, write_atomic};
use cts_core::{
    parse_config, preset, run_scenario, ConfigError, CooperationMode, Error, RunMetrics,
    ScenarioConfig,
};

#[derive(Parser, Debug)]
#[command(name = "coopctl", version, about = "Cooperative dual-arm task-space simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario in one cooperation mode.
    Run {
        #[command(flatten)]
        source: Source,
        /// Cooperation mode; defaults to the one in the config.
        #[arg(long)]
        mode: Option<CooperationMode>,
    },
    /// Simulate one scenario in the symmetric, master-slave, asymmetric and
    /// barrier modes and tabulate the results.
    Compare {
        #[command(flatten)]
        source: Source,
    },
    /// Vary the cooperation damping k_p over a list of values.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Single mode to sweep; asymmetric and barrier when absent.
        #[arg(long)]
        mode: Option<CooperationMode>,
        /// Comma-separated damping values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.0, 0.25, 1.0, 4.0])]
        kp: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in preset name (same as --preset).
    #[arg(value_name = "PRESET", conflicts_with_all = ["preset", "config"])]
    positional: Option<String>,
    /// Built-in preset: paper-1d, paper-planar, paper-6dof.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Integration step in seconds.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
}

impl Source {
    /// Loads the scenario and applies the command-line overrides. Returns the
    /// run name used as the output file prefix.
    fn load(&self) -> anyhow::Result<(String, ScenarioConfig)> {
        let (name, mut cfg) = match (&self.positional, &self.preset, &self.config) {
            (Some(name), _, _) | (None, Some(name), _) => (name.clone(), preset(name)?),
            (None, None, Some(path)) => {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "config".into());
                (name, parse_config(path)?)
            }
            (None, None, None) => {
                return Err(ConfigError::Schema {
                    key: "source".into(),
                    message: "give a preset name, --preset or --config".into(),
                }
                .into())
            }
        };
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(horizon) = self.horizon {
            cfg.horizon = horizon;
        }
        cfg.validate()?;
        Ok((name, cfg))
    }
}

/// One finished simulation, rendered but not yet written.
struct Output {
    stem: String,
    mode: CooperationMode,
    metrics: RunMetrics,
    csv: String,
    summary: String,
}

fn file_tag(mode: &CooperationMode) -> String {
    mode.to_string().replace(':', "-").replace(',', "_")
}

fn simulate(stem: String, cfg: &ScenarioConfig) -> anyhow::Result<Output> {
    let (traj, metrics) =
        run_scenario(cfg).with_context(|| format!("{stem}: mode {} failed", cfg.mode))?;
    Ok(Output {
        csv: trajectory_csv(&traj),
        summary: metrics_document(&stem, cfg, &metrics),
        mode: cfg.mode,
        metrics,
        stem,
    })
}

/// Runs every job on its own thread; results keep the job order.
fn simulate_all(jobs: Vec<(String, ScenarioConfig)>) -> anyhow::Result<Vec<Output>> {
    thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(stem, cfg)| scope.spawn(move || simulate(stem.clone(), cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("simulation thread panicked"))?)
            .collect()
    })
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "never".to_string(), |t| format!("{t:.4} s"))
}

fn summary_line(o: &Output) -> String {
    let m = &o.metrics;
    format!(
        "{}: mode {}, t_thr {}, |p~| {:.3e}, |eps~| {:.3e}, alpha_p [{:.4}, {:.4}], alpha_w [{:.4}, {:.4}], clamps {}",
        o.stem,
        o.mode,
        fmt_time(m.time_to_threshold),
        m.final_error_norms.position,
        m.final_error_norms.eps,
        m.alpha_p_range.0,
        m.alpha_p_range.1,
        m.alpha_omega_range.0,
        m.alpha_omega_range.1,
        m.clamp_events,
    )
}

fn comparison_table(outputs: &[Output]) -> String {
    let mut out = format!(
        "{:<14} {:>12} {:>24} {:>24} {:>24} {:>10} {:>10} {:>10} {:>10} {:>6}\n",
        "mode",
        "t_thr_s",
        "final_err_p_norm",
        "final_err_eps_norm",
        "final_theta_a",
        "alpha_p_lo",
        "alpha_p_hi",
        "alpha_w_lo",
        "alpha_w_hi",
        "clamps"
    );
    for o in outputs {
        let m = &o.metrics;
        let t_thr = m.time_to_threshold.map_or_else(|| "none".into(), |t| format!("{t:.6}"));
        writeln!(
            out,
            "{:<14} {:>12} {:>24.16e} {:>24.16e} {:>24.16e} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>6}",
            o.mode.to_string(),
            t_thr,
            m.final_error_norms.position,
            m.final_error_norms.eps,
            m.final_error_norms.angle,
            m.alpha_p_range.0,
            m.alpha_p_range.1,
            m.alpha_omega_range.0,
            m.alpha_omega_range.1,
            m.clamp_events,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes all files or none: on the first failure, files already written by
/// this invocation are removed again.
fn write_all(dir: &Path, files: &[(String, &str)]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = write_atomic(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e).with_context(|| format!("cannot write {}", path.display()));
        }
        written.push(path);
    }
    Ok(())
}

fn emit(dir: &Path, outputs: &[Output], extra: Option<(String, String)>) -> anyhow::Result<()> {
    let mut files: Vec<(String, &str)> = Vec::new();
    for o in outputs {
        files.push((format!("{}.csv", o.stem), &o.csv));
        files.push((format!("{}.metrics.txt", o.stem), &o.summary));
    }
    if let Some((name, contents)) = &extra {
        files.push((name.clone(), contents));
    }
    write_all(dir, &files)?;
    for o in outputs {
        println!("{}", summary_line(o));
    }
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run { source, mode } => {
            let (name, mut cfg) = source.load()?;
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            let stem = format!("{name}_{}", file_tag(&cfg.mode));
            let output = simulate(stem, &cfg)?;
            emit(&source.out, &[output], None)
        }
        Command::Compare { source } => {
            let (name, cfg) = source.load()?;
            let jobs = [
                CooperationMode::Symmetric,
                CooperationMode::MASTER_SLAVE,
                CooperationMode::Asymmetric,
                CooperationMode::Barrier,
            ]
            .into_iter()
            .map(|mode| (format!("{name}_{}", file_tag(&mode)), cfg.with_mode(mode)))
            .collect();
            let outputs = simulate_all(jobs)?;
            let table = comparison_table(&outputs);
            emit(&source.out, &outputs, Some((format!("{name}_compare.txt"), table)))
        }
        Command::Sweep { source, mode, kp } => {
            let (name, cfg) = source.load()?;
            if kp.is_empty() {
                bail!(ConfigError::Schema {
                    key: "kp".into(),
                    message: "empty list".into()
                });
            }
            let modes = match mode {
                Some(m) => vec![m],
                None => vec![CooperationMode::Asymmetric, CooperationMode::Barrier],
            };
            let mut jobs = Vec::new();
            for mode in &modes {
                for &k in &kp {
                    let mut c = cfg.with_mode(*mode);
                    c.gains.k_p_damp = k;
                    c.validate()?;
                    jobs.push((format!("{name}_{}_kp{k}", file_tag(mode)), c));
                }
            }
            let outputs = simulate_all(jobs)?;
            emit(&source.out, &outputs, None)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        match cause.downcast_ref::<Error>() {
            Some(Error::Diverged { .. }) => return 3,
            Some(Error::InvalidArgument(_) | Error::BarrierDomain { .. }) => return 2,
            _ => {}
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("coopctl: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
