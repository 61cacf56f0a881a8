use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the splatting engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell ({row}, {col}) is outside the {rows}x{cols} grid")]
    CellOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("missing rendered buffer for cell {0}")]
    MissingPatch(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("mask has no observed pixels")]
    EmptyMask,
    #[error("region is empty")]
    EmptyRegion,
    #[error("vector norm {0:e} is too small")]
    ZeroNorm(f64),
    #[error("non-finite gradient at index {0}")]
    NonFiniteGradient(usize),
    #[error("update produced a non-finite parameter at index {0}")]
    NonFiniteParameter(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unreachable mask ratio: {0}")]
    UnreachableRatio(String),
    #[error("invalid parameter file: {0}")]
    BadParamFile(String),
    #[error("image format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
