use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the scoring engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported model format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(
        "masked-LM export {0} does not expose attention/hidden-state outputs; \
         re-export it with output_attentions=true and output_hidden_states=true"
    )]
    MissingAttentionOutputs(PathBuf),

    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sequence of {len} tokens exceeds model capacity of {max} positions")]
    OverLength { len: usize, max: usize },

    #[error("candidate of {candidate} tokens leaves no room for context (capacity {capacity})")]
    CandidateTooLong { candidate: usize, capacity: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("layer index {layer} out of range for a {num_layers}-layer model")]
    LayerOutOfRange { layer: usize, num_layers: usize },

    #[error("baseline confidence is exactly zero; gain ratio undefined")]
    ZeroBaseConfidence,

    #[error("unknown variant tag: {0}")]
    UnknownVariant(String),

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error(
        "baseline fingerprint mismatch for {model}: file has {expected}, loaded model has {actual}"
    )]
    FingerprintMismatch {
        model: &'static str,
        expected: String,
        actual: String,
    },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Row {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate record id: {0}")]
    DuplicateId(String),

    #[error("perturbation not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("transport solver failed: {0}")]
    Transport(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
