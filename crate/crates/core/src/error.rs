use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty node")]
    EmptyNode,
    #[error("no samples to fit")]
    NoSamples,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bandwidth exceeds sample count ({bandwidth} > {samples})")]
    BandwidthExceedsSamples { bandwidth: usize, samples: usize },
    #[error("SMOTE requires ≥2 minority samples (got {0})")]
    SmoteTooFewSamples(usize),
    #[error("VIF needs ≥2 features")]
    VifTooFewFeatures,
    #[error("empty sample")]
    EmptySample,
    #[error("spatial index is empty")]
    EmptyIndex,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate bounding box")]
    DegenerateBbox,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
