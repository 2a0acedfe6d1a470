use thiserror::Error;

/// Errors produced by the simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A non-negative representation does not exist; `direction` is a vector
    /// that the generators cannot reach.
    #[error("infeasible: no non-negative representation (unreachable direction {direction:?})")]
    Infeasible { direction: Vec<f64> },

    #[error("driver validation failed at segment {segment}: {reason}")]
    InvalidDriver { segment: usize, reason: String },

    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: u64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SbmError {
    fn from(e: std::io::Error) -> Self {
        SbmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SbmError>;
