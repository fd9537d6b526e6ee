use thiserror::Error;

use crate::corpus::Span;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("document `{doc_key}`: {message}")]
    Validation { doc_key: String, message: String },

    #[error("document `{doc_key}`: span {span} is out of bounds for {len} tokens")]
    SpanOutOfBounds {
        doc_key: String,
        span: Span,
        len: usize,
    },

    #[error("log-softmax over an empty or fully masked score vector")]
    NoValidCandidate,

    #[error("non-finite loss {value} ({context})")]
    NonFiniteLoss { value: f64, context: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("synthetic corpus: {0}")]
    Synth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
