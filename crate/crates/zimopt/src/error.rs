use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("numeric failure at step {step}: {reason}")]
    NumericFailure { step: u64, reason: String },

    #[error("iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("{path}: bad IDX magic: expected {expected:#010x}, got {got:#010x}")]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        got: u32,
    },

    #[error("{path}: truncated IDX payload: header promises {expected} bytes, found {got}")]
    IdxTruncated {
        path: PathBuf,
        expected: u64,
        got: u64,
    },

    #[error("{path}: trailing bytes after IDX payload: expected {expected}, found {got}")]
    IdxTrailing {
        path: PathBuf,
        expected: u64,
        got: u64,
    },

    #[error("{path}: IDX dimensions overflow the addressable size")]
    IdxOverflow { path: PathBuf },

    #[error("{path}: label {label} out of range (dataset has {classes} classes)")]
    LabelRange {
        path: PathBuf,
        label: u8,
        classes: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
