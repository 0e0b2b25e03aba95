//! Error and warning types shared across the crate.

use thiserror::Error;

/// Errors produced by indexing, expansion, reranking, fusion, and evaluation.
#[derive(Debug, Error)]
pub enum GffError {
    /// Two documents in one corpus share an id.
    #[error("duplicate document id: {0}")]
    DuplicateDocId(String),

    /// A query was empty after whitespace trimming.
    #[error("query {0:?} has empty text")]
    EmptyQueryText(String),

    /// A prompt template is missing a placeholder its strategy requires.
    #[error("template {template:?} is missing required placeholder {placeholder:?}")]
    MissingPlaceholder { template: String, placeholder: String },

    /// A passage was required (D2K rendering) but not supplied, or vice versa.
    #[error("{0}")]
    PassageMismatch(String),

    /// Generator endpoint failed after exhausting retries.
    #[error("generator call failed: {0}")]
    Generator(String),

    /// Reranker endpoint or stand-in failed.
    #[error("reranker failed: {0}")]
    Reranker(String),

    /// A remote reranker returned the wrong number of scores for a batch.
    #[error("reranker returned {got} scores for {expected} inputs")]
    ScoreCountMismatch { expected: usize, got: usize },

    /// A reranker produced a NaN or infinite score.
    #[error("non-finite score for document {0:?}")]
    NonFiniteScore(String),

    /// rerank_list was called with an empty candidate list.
    #[error("candidate list for query {0:?} is empty")]
    EmptyCandidates(String),

    /// A candidate document id was not resolvable from the corpus.
    #[error("document {0:?} not present in corpus")]
    MissingDocument(String),

    /// The anchor document was absent from an expansion list.
    #[error("anchor document {0:?} absent from expansion list")]
    AnchorMissing(String),

    /// Two lists that must share a doc-id set do not.
    #[error("ranked lists do not share one document set: {0}")]
    DocSetMismatch(String),

    /// Fusion weights summed to zero.
    #[error("fusion weights sum to zero")]
    ZeroWeightSum,

    /// A ranked list violated its ordering or uniqueness invariants.
    #[error("invalid ranked list: {0}")]
    InvalidRankedList(String),

    /// A malformed line in a qrels, run, queries, or corpus file.
    #[error("{path}:{line}: {msg}")]
    MalformedLine { path: String, line: usize, msg: String },

    /// Evaluation was asked to average over an empty qrels set.
    #[error("qrels contain no judgments")]
    EmptyQrels,

    /// Configuration was invalid or referenced missing files.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Filesystem failure, with the path that caused it.
    #[error("{path}: {source}")]
    Io { path: String, #[source] source: std::io::Error },

    /// JSON (de)serialization failure, with the path involved.
    #[error("{path}: {source}")]
    Json { path: String, #[source] source: serde_json::Error },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GffError>;

impl GffError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        GffError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        GffError::Json { path: path.as_ref().display().to_string(), source }
    }
}

/// A value paired with an optional non-fatal warning.
///
/// Several operations degrade instead of failing (empty retrieval, unparseable
/// generator output, a query with no relevant documents). Those return
/// `Flagged` so callers and reports can observe the degradation.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warning: Option<String>,
}

impl<T> Flagged<T> {
    /// Wrap a value that carries no warning.
    pub fn clean(value: T) -> Self {
        Flagged { value, warning: None }
    }

    /// Wrap a value with a warning message.
    pub fn flagged(value: T, warning: impl Into<String>) -> Self {
        Flagged { value, warning: Some(warning.into()) }
    }

    pub fn is_flagged(&self) -> bool {
        self.warning.is_some()
    }

    /// Discard the warning and keep the value.
    pub fn into_value(self) -> T {
        self.value
    }
}
