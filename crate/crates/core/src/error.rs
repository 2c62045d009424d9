use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error at {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("cannot derive a combined class from an empty topic list")]
    EmptyTopics,

    #[error("provider mapping does not cover: {}", .0.join(", "))]
    UncoveredProviders(Vec<String>),

    #[error("no extractable tokens in corpus")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vectors come from different embedding spaces: {0} vs {1}")]
    SourceMismatch(String, String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("reducer rank {k} exceeds limit {limit}")]
    RankTooLarge { k: usize, limit: usize },

    #[error("external embedder `{name}` failed after {attempts} attempt(s): {reason}")]
    Transport {
        name: String,
        attempts: u32,
        reason: String,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("source mode `{0}` selects empty text")]
    EmptySource(&'static str),

    #[error("fingerprint mismatch: ledger {expected}, got {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("ledger holds no events")]
    EmptyLedger,

    #[error("similarity shares are undefined (no positive similarity mass); use the probability basis")]
    SimilarityUndefined,

    #[error("scores are not normalized: {0}")]
    NotNormalized(String),

    #[error("class sets differ: {0}")]
    ClassMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("modality `{modality}` has no provider mapping for class `{class_id}`")]
    UnmappedProvider { modality: String, class_id: String },

    #[error("sequence gap in event log: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },

    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingestion { .. } => "ingestion",
            Error::InvalidCorpus(_) => "invalid_corpus",
            Error::EmptyTopics => "empty_topics",
            Error::UncoveredProviders(_) => "uncovered_providers",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SourceMismatch(..) => "source_mismatch",
            Error::ZeroVector => "zero_vector",
            Error::NonFinite(_) => "non_finite",
            Error::RankTooLarge { .. } => "rank_too_large",
            Error::Transport { .. } => "transport",
            Error::Training(_) => "training",
            Error::EmptyEvaluation => "empty_evaluation",
            Error::InvalidEvent(_) => "invalid_event",
            Error::EmptySource(_) => "empty_source",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::EmptyLedger => "empty_ledger",
            Error::SimilarityUndefined => "similarity_undefined",
            Error::NotNormalized(_) => "not_normalized",
            Error::ClassMismatch(_) => "class_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::UnmappedProvider { .. } => "unmapped_provider",
            Error::SequenceGap { .. } => "sequence_gap",
            Error::CorruptLog { .. } => "corrupt_log",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Artifact(_) => "artifact",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
