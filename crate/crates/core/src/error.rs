use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The relative rotation between the two frames is a half turn, so the
    /// interpolating geodesic is not unique.
    #[error("relative rotation is a half turn; interpolated orientation is not unique")]
    AmbiguousMidpoint,

    #[error("cooperation parameter {name} = {value} lies outside the barrier domain (0, 1)")]
    BarrierDomain { name: &'static str, value: f64 },

    #[error("integration diverged at t = {t} s")]
    Diverged { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
