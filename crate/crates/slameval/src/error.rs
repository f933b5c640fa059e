//! Error types shared across the toolkit.

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("timestamp {t} outside trajectory range [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("incompatible schema version: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for each error class.
    ///
    /// 0 is success; 1 is reserved for unexpected panics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Config(_) => 2,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 3,
            Error::Io(_) => 3,
            Error::Parse { .. } => 4,
            Error::Format(_) => 5,
            Error::InsufficientData { .. } => 6,
            Error::DegenerateGeometry(_) => 6,
            Error::OutOfRange { .. } => 6,
            Error::SchemaMismatch { .. } => 7,
            Error::Protocol(_) => 8,
        }
    }
}
