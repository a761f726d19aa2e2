use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver, the learning stack or the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    FormatVersion { found: u64, expected: u64 },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("variable {0} is not basic in this solution")]
    NotBasic(usize),

    #[error("simplex iteration limit ({0} pivots) reached")]
    IterLimit(usize),

    #[error("stale graph delta: delta base version {delta} != graph version {graph}")]
    StaleDelta { delta: u64, graph: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("result sets cover different instances: {0}")]
    InstanceMismatch(String),

    #[error("action-space count overflows beyond n = 12 (got n = {0})")]
    Overflow(usize),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::FormatVersion { .. } => "format_version",
            Error::Invariant(_) => "invariant",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NotBasic(_) => "not_basic",
            Error::IterLimit(_) => "iter_limit",
            Error::StaleDelta { .. } => "stale_delta",
            Error::Shape(_) => "shape",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::NonFinite(_) => "non_finite",
            Error::InstanceMismatch(_) => "instance_mismatch",
            Error::Overflow(_) => "overflow",
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
