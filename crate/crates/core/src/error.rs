use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One rejected row of a delimited input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source file, header included.
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid quantile interval ({p}, {q}): need 0 <= p < q <= 100")]
    InvalidInterval { p: i64, q: i64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed input {path}: {message}")]
    MalformedInput { path: PathBuf, message: String },

    #[error("{} row error(s) in {path}; first: {}", rows.len(), rows.first().map(|r| r.to_string()).unwrap_or_default())]
    Rows { path: PathBuf, rows: Vec<RowError> },

    #[error("duplicate record in {path}: {key}")]
    Duplicate { path: PathBuf, key: String },

    #[error("unknown covariate key `{0}`")]
    UnknownKey(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("cache version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Integrity,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) | Error::DegenerateDesign(_) => ErrorClass::Numerical,
            Error::Integrity(_) | Error::Version { .. } => ErrorClass::Integrity,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
