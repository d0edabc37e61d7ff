//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its allowed range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two models (or distributions) that must share a vocabulary do not.
    #[error("vocabulary mismatch: expected size {expected}, got {got}")]
    VocabMismatch { expected: usize, got: usize },

    /// A scored token had probability zero, which smoothed models never
    /// produce for event tokens. Typically the target contained a
    /// structural marker token.
    #[error("degenerate probability: token id {token_id} at position {position} has probability 0")]
    DegenerateProbability { token_id: u32, position: usize },

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Quantile of an empty loss window.
    #[error("loss window is empty")]
    EmptyWindow,

    /// Truncated training dropped every example.
    #[error("loss truncation kept zero examples; relax keep_c / keep_c_gnd or check the corpus")]
    EmptyKeepSet,

    /// No fact token shared by grounding and target was found to edit.
    #[error("no editable fact shared by grounding and target")]
    NoEditableFact,

    /// A serialized model or dataset file is malformed.
    #[error("bad file format: {0}")]
    BadFormat(String),

    /// A per-example failure, annotated with the example's index.
    #[error("example {index}: {source}")]
    AtExample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// An internal invariant was violated; this is a bug.
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
