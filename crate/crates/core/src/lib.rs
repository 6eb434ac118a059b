//! Cooperative task space (CTS) and its weighted extension for dual-arm
//! coordination, adaptive cooperation-parameter laws for absolute motion
//! control, and a deterministic closed-loop simulator.
//!
//! Module map:
//!
//! * [`so3`]: quaternion and angle-axis algebra;
//! * [`task_space`]: absolute/relative frames and twist maps;
//! * [`control`]: feedback laws, cooperation update laws, Lyapunov functions;
//! * [`sim`]: RK4 closed-loop simulation, trajectories and metrics;
//! * [`config`]: scenario files and built-in presets;
//! * [`export`]: trajectory CSV and metrics documents.

pub mod config;
pub mod control;
pub mod error;
pub mod export;
pub mod sim;
pub mod so3;
pub mod task_space;

pub use config::{parse_config, parse_config_str, preset, ConfigError, PRESET_NAMES};
pub use control::{AbsoluteError, CooperationMode, Gains};
pub use error::{Error, Result};
pub use sim::{
    run_scenario, RunMetrics, Sample, Scenario, ScenarioConfig, SystemState, Trajectory,
};
pub use so3::{AngleAxis, Quaternion, Vec3};
pub use task_space::{CooperationState, Pose, Twist};
