use std::path::PathBuf;

use thiserror::Error;
use v2c_tensor::TensorError;

use crate::corpus::FeatureError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Feature(#[from] FeatureError),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sequence of length {len} exceeds max_len {max}")]
    Overlength { len: usize, max: usize },

    #[error("{what}: expected begin marker {expected}, found {found:?}")]
    MissingBeginMarker {
        what: &'static str,
        expected: usize,
        found: Option<usize>,
    },

    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("caption is empty")]
    EmptyCaption,

    #[error("all {0} records were skipped")]
    AllRecordsSkipped(usize),

    #[error("vocabulary: {0}")]
    Vocab(String),

    #[error("ratings: {0}")]
    Ratings(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::File {
            path: path.into(),
            source,
        }
    }
}
