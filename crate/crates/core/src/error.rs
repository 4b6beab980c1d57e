use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FwfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FwfError {
    #[error("series generation diverged at step {step}")]
    GenerationDiverged { step: usize },

    #[error("insufficient data: need more than {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid fold count {k} for {n} samples")]
    InvalidFold { k: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inconsistent kernel configuration: {0}")]
    InconsistentConfig(String),

    #[error("degenerate matrix: largest eigenvalue {eig_max} is not positive")]
    DegenerateMatrix { eig_max: f64 },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Coarse failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
    Io,
}

impl FwfError {
    pub fn class(&self) -> ErrorClass {
        match self {
            FwfError::GenerationDiverged { .. }
            | FwfError::DegenerateMatrix { .. }
            | FwfError::Decomposition(_) => ErrorClass::Numerical,
            FwfError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        FwfError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FwfError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        FwfError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
