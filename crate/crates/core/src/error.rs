use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid sentence: {0}")]
    InvalidSentence(String),
    #[error("unknown environment class `{0}`")]
    UnknownEnvClass(String),
    #[error("invalid lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("corpus too small: {tokens} tokens, need at least {needed}")]
    CorpusTooSmall { tokens: usize, needed: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("token `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
