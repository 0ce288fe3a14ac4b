use thiserror::Error;

/// Errors surfaced by the library. Contract violations (dimension mismatches,
/// out-of-range arguments) and capacity guards are reported here rather than
/// panicking so the CLI can map them to exit codes.
#[derive(Error, Debug)]
pub enum PottsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity guard exceeded: {0}")]
    CapacityExceeded(String),

    #[error("sampling failed: {0}")]
    SamplingFailed(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("optimization did not converge from any start (best f = {best_f})")]
    OptimizationFailure { best_f: f64, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PottsError>;
