use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm is below 1e-12")]
    ZeroNormVector,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector contains non-finite values")]
    NonFinite,

    #[error("malformed CoNLL-U at line {line}: {reason}")]
    MalformedConllu { line: usize, reason: String },

    #[error("dependency heads form a cycle (sentence starting at line {line})")]
    CyclicTree { line: usize },

    #[error("unit list is empty")]
    EmptyUnitList,

    #[error("embedding text is empty")]
    EmptyText,

    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),

    #[error("provider protocol error: {0}")]
    ProviderProtocol(String),

    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),

    #[error("manifest syntax error at line {line}: {reason}")]
    ManifestSyntax { line: usize, reason: String },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersionMismatch { expected: u32, found: u32 },

    #[error("corrupt file at byte offset {offset}: {reason}")]
    CorruptFile { offset: u64, reason: String },

    #[error("index is empty")]
    EmptyIndex,

    #[error("no detections survived the confidence threshold")]
    NoDetections,

    #[error("segment holds {available} frames but {requested} were requested")]
    SegmentTooShort { requested: usize, available: usize },

    #[error("frame accessor failed: {0}")]
    FrameAccessorFailure(String),

    #[error("prompt list is empty")]
    EmptyPromptList,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(offset: u64, reason: impl Into<String>) -> Self {
        Error::CorruptFile {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn conllu(line: usize, reason: impl Into<String>) -> Self {
        Error::MalformedConllu {
            line,
            reason: reason.into(),
        }
    }
}
