use thiserror::Error;

/// Errors produced by the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pump parameter {0} is at or above the oscillation threshold (must be < 1)")]
    AboveThreshold(f64),

    #[error("gain {0} is below 1; no parametric amplification")]
    GainDomain(f64),

    #[error("temporal mode is not normalized: integral of u^2 = {0}")]
    ModeNotNormalized(f64),

    #[error("trigger mode must be causal (zero after the click time)")]
    NonCausalTrigger,

    #[error("covariance matrix is unphysical: smallest symplectic eigenvalue {0} < 1/2")]
    Unphysical(f64),

    #[error("herald click probability {0} is not positive")]
    DegenerateHerald(f64),

    #[error("quadrature marginal is negative for phase {theta}: state is invalid")]
    InvalidState { theta: f64 },

    #[error("insufficient calibration data: {got} records, need at least {need}")]
    InsufficientCalibration { got: usize, need: usize },

    #[error("measurement grid too coarse: completeness error {0}")]
    GridResolution(f64),

    #[error("dataset has {got} records, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
