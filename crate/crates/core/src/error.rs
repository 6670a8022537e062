use thiserror::Error;

use crate::macromodel::LumpedRlModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: frequency {freq_hz} Hz is not strictly above the previous row")]
    Order { row: usize, freq_hz: f64 },

    #[error("row {row}: {reason}")]
    Value { row: usize, reason: String },

    #[error("frequency {freq_hz} Hz outside the valid domain [{lo}, {hi}] Hz")]
    Domain { freq_hz: f64, lo: f64, hi: f64 },

    #[error("at least {needed} rows required, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("unphysical input: {0}")]
    UnphysicalInput(String),

    #[error("singular mechanical response at {freq_hz} Hz (|D| = 0)")]
    SingularResponse { freq_hz: f64 },

    #[error("degenerate admittance: b and k_d are both zero")]
    DegenerateAdmittance,

    #[error(
        "fit did not converge after {starts} starts (best relative RMS residual {residual:.3e})"
    )]
    Fit {
        best: Box<LumpedRlModel>,
        residual: f64,
        starts: usize,
    },

    #[error("no resonance inside the damping-data domain [{lo}, {hi}] Hz")]
    NoResonanceInBand { lo: f64, hi: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
