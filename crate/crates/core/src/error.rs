//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the screening pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid volume header: {0}")]
    Header(String),

    #[error("buffer length mismatch: header declares {expected} voxels, raw file holds {actual}")]
    BufferLengthMismatch { expected: usize, actual: usize },

    #[error("unsupported element type: {0}")]
    UnsupportedElementType(String),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("ROI outside volume")]
    RoiOutsideVolume,

    #[error("non-unit needle direction (|d| = {0})")]
    NonUnitDirection(f64),

    #[error("no valid non-biopsy site")]
    NoValidNonBiopsySite,

    #[error("ROI cannot be fitted")]
    RoiCannotBeFitted,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown feature: {0}")]
    UnknownFeature(String),

    #[error("class {0} has fewer than 2 rows")]
    ClassTooSmall(u8),

    #[error("single-class labels")]
    SingleClass,

    #[error("minority class of size 1 cannot be oversampled")]
    MinorityTooSmall,

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("{0}")]
    Other(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
