//! Crate-wide error type.
//!
//! Variant names are stable identifiers: the CLI prints `err.name()` on
//! standard error so scripts can match on them.

use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at {path}:{line}: {detail}")]
    MalformedRecord {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("dangling reference `{0}`")]
    DanglingReference(String),
    #[error("mixed split: {0}")]
    MixedSplit(String),
    #[error("unknown prompt id `{0}`")]
    UnknownPromptId(String),
    #[error("remote embedding service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("corrupt model file: {0}")]
    CorruptModelFile(String),
    #[error("bad template: {0}")]
    BadTemplate(String),
    #[error("missing demonstration record for query `{query_id}`, prompt `{prompt_id}`")]
    MissingRecord { query_id: String, prompt_id: String },
    #[error("llm unavailable: {0}")]
    LlmUnavailable(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("bad arity: k={k} out of range for n={n}")]
    BadArity { n: usize, k: usize },
    #[error("bad dimension: {0} (minimum 2)")]
    BadDimension(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable variant name, used for machine-readable error reporting.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::DuplicateId(_) => "DuplicateId",
            Error::DanglingReference(_) => "DanglingReference",
            Error::MixedSplit(_) => "MixedSplit",
            Error::UnknownPromptId(_) => "UnknownPromptId",
            Error::RemoteUnavailable(_) => "RemoteUnavailable",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::EmptyDataset => "EmptyDataset",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::CorruptModelFile(_) => "CorruptModelFile",
            Error::BadTemplate(_) => "BadTemplate",
            Error::MissingRecord { .. } => "MissingRecord",
            Error::LlmUnavailable(_) => "LlmUnavailable",
            Error::RateLimited(_) => "RateLimited",
            Error::BadArity { .. } => "BadArity",
            Error::BadDimension(_) => "BadDimension",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
