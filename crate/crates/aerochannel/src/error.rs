use thiserror::Error;

/// Errors produced by channel construction, configuration validation, and
/// simulation runs.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A probability, distribution, or transition matrix violates its
    /// constraints (entries outside [0,1], rows not summing to one, ...).
    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    /// A scalar parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An index into an alphabet or bin list is out of bounds.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The explicit velocity update would diverge for this diameter at the
    /// configured time step (per-step drag factor must stay below one).
    #[error(
        "unstable time step: drag factor alpha = {alpha:.4} for d = {diameter:.3e} m \
         (explicit update requires alpha < 1; use the exponential integrator)"
    )]
    UnstableTimeStep { alpha: f64, diameter: f64 },

    /// Environment or emission configuration failed validation. The message
    /// names the offending field.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Requested builtin environment does not exist.
    #[error("unknown preset `{0}` (available: office, corridor, classroom, bus)")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
