use thiserror::Error;

use crate::doc_model::Span;

/// Errors raised while reading or writing corpora.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("document {doc_id:?}: span {span} lies outside the document ({len} tokens)")]
    SpanOutOfBounds { doc_id: String, span: Span, len: usize },
    #[error("document {doc_id:?}: {message}")]
    Unserializable { doc_id: String, message: String },
    #[error("interchange schema mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: String, found: String },
    #[error("interchange decode failed on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Errors raised by in-memory model construction and transforms.
#[derive(Debug, Error)]
pub enum CorefError {
    #[error("invalid cluster set: {0}")]
    InvalidClusters(String),
    #[error("invalid document {doc_id:?}: {message}")]
    InvalidDocument { doc_id: String, message: String },
    #[error("document {0:?} has no gold annotation")]
    MissingGold(String),
    #[error("document {doc_id:?}: sentence of {len} tokens exceeds segment limit {limit}")]
    SentenceTooLong { doc_id: String, len: usize, limit: usize },
    #[error("document {doc_id:?}: mention {span} cannot be kept inside one segment")]
    UnsplittableMention { doc_id: String, span: Span },
    #[error("training schedule needs at least one UA-format corpus with documents")]
    EmptyUad,
    #[error("antecedent {antecedent} is not a valid choice for candidate {candidate}")]
    InvalidAntecedent { candidate: usize, antecedent: usize },
    #[error("candidate {0} has an empty gold antecedent set")]
    EmptyGoldAntecedents(usize),
    #[error("non-finite value in {location}: {detail}")]
    NonFinite { location: String, detail: String },
    #[error("key has no mentions")]
    EmptyKey,
    #[error("document ids differ between key and response: {0}")]
    DocMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = CorefError> = std::result::Result<T, E>;
