use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("document {0} has no tokens")]
    EmptyDocument(String),

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("topic vectors have mismatched dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("user {0} has no tweets")]
    NoTweets(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
