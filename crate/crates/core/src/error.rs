use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: bad IDX magic 0x{observed:08x} (expected 0x{expected:08x})")]
    BadMagic {
        path: PathBuf,
        observed: u32,
        expected: u32,
    },

    #[error("{path}: short read at byte offset {offset} (needed {needed} more bytes)")]
    ShortRead {
        path: PathBuf,
        offset: u64,
        needed: u64,
    },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged at iteration {iteration} (last good iteration: {last_good:?}): {reason}")]
    Diverged {
        iteration: u64,
        last_good: Option<u64>,
        reason: String,
    },

    #[error("isotropic noise scale used before it was frozen")]
    NoiseNotFrozen,

    #[error("dense path guard: {what} has size {size}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("sample {sample}: predicted probability {prob:e} is outside the numerically safe range")]
    ProbabilityOutOfRange { sample: usize, prob: f64 },

    #[error("zero-norm direction vector")]
    ZeroVector,

    #[error("misaligned inputs: {0}")]
    Misaligned(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
