//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the analysis, training and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported audio encoding: {0}")]
    Unsupported(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid filterbank spec: {0}")]
    Spec(String),

    #[error("input too short: {samples} samples for frame size {frame_size}")]
    InputTooShort { samples: usize, frame_size: usize },

    #[error("sample rate mismatch: expected {expected} Hz, got {found} Hz")]
    RateMismatch { expected: u32, found: u32 },

    #[error("constellation has no peaks")]
    NoPeaks,

    #[error("extractor configuration failed: {0}")]
    Configuration(String),

    #[error("incompatible front-end: {0}")]
    Compatibility(String),

    #[error("no frames start inside the interval [{start}, {end}] s")]
    Interval { start: f64, end: f64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mixing failed: {0}")]
    Mix(String),

    #[error("snr measurement failed: {0}")]
    Measurement(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 for invalid input or parameters, 3 for data
    /// problems, 4 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Spec(_)
            | Error::Parse { .. }
            | Error::Compatibility(_)
            | Error::Dimension { .. }
            | Error::Interval { .. } => 2,
            Error::Internal(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
