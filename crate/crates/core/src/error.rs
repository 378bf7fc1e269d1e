use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("{id}: offsets [{start}, {end}) out of bounds for text of length {len}")]
    OffsetOutOfBounds {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("context {0} has no sentences")]
    EmptyContext(String),

    #[error("unknown sentence: {0}")]
    UnknownSentence(String),

    #[error("unknown context: {0}")]
    UnknownContext(String),

    #[error("invalid span {context_id}:{first}-{last}: {reason}")]
    InvalidSpan {
        context_id: String,
        first: usize,
        last: usize,
        reason: &'static str,
    },

    #[error("context ordinal {ordinal} out of range ({n} contexts)")]
    OrdinalOutOfRange { ordinal: usize, n: usize },

    #[error("empty query")]
    EmptyQuery,

    #[error("length mismatch: {left} candidates vs {right} scores")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("negative count in novelty counts")]
    NegativeCount,

    #[error("unknown node: {0}")]
    UnknownNode(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
