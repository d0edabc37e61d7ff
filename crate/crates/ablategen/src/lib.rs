//! Grounded text generation toolkit, runnable at desk scale over a
//! deterministic conditional language model.
//!
//! The model estimates `P(token | grounding, context, prefix)` by mixing an
//! add-k n-gram over `[context, <sep>, prefix]` with a unigram cache over
//! the grounding; disabling the cache gives the matching ungrounded
//! estimator `P(token | context, prefix)`. On top of that sit:
//!
//! - [`decode`]: per-token support scores (grounded/ungrounded log-ratio),
//!   the interpolation and addition transforms, nucleus sampling, and the
//!   sentence-bounded generation loop;
//! - [`truncate`]: loss-truncation training against a dynamic window of
//!   recent losses, with a grounded variant keyed on the grounding gap;
//! - [`ablation`]: the factual-ablation measure, accuracy and
//!   margin-accuracy of preferring an entailing grounding over an ablated
//!   one;
//! - [`metrics`]: corpus-level BLEU and NIST;
//! - [`datagen`]: synthetic fact edits, natural extraction from revision
//!   pairs, quality filters, and a templated desk corpus.
//!
//! Every capability has a runnable demo under `examples/`; the `ablategen`
//! binary wraps the same calls behind subcommands.

pub mod ablation;
pub mod cli;
pub mod datagen;
pub mod decode;
pub mod error;
pub mod jsonl;
pub mod lm;
pub mod metrics;
pub mod ngram;
pub mod truncate;
pub mod vocab;

#[cfg(test)]
pub(crate) mod testutil;

pub use ablation::{AblationExample, AblationReport, ScoredPair};
pub use decode::{DecodingPolicy, PolicyKind, SamplerConfig, StopRule};
pub use error::{Error, Result};
pub use lm::{CacheMode, GroundedLM, LmParams, ProbDist};
pub use ngram::NGramModel;
pub use truncate::{LossWindow, TruncationConfig, TruncationMode};
pub use vocab::{Example, TokenId, TokenSeq, Vocab};
