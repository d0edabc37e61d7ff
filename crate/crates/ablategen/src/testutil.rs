//! Shared builders for unit tests.

use crate::lm::{CacheMode, GroundedLM, ProbDist};
use crate::ngram::NGramModel;
use crate::vocab::Vocab;

/// Vocab {<unk>, <bos>, <eos>, <sep>, a, b}: four event tokens.
pub fn two_word_vocab() -> Vocab {
    let mut vocab = Vocab::new();
    vocab.add_or_get("a");
    vocab.add_or_get("b");
    vocab
}

/// Untrained background over [`two_word_vocab`]: uniform 0.25 on the four
/// event tokens, mixed with a grounding cache at the given lambda.
pub fn uniform_cache_model(lambda: f64) -> GroundedLM {
    let background = NGramModel::train(&[], two_word_vocab(), 2, 1.0).unwrap();
    GroundedLM::new(background, lambda, CacheMode::GroundingCache).unwrap()
}

/// Distribution over [`two_word_vocab`] ids: (<unk>, <eos>, a, b).
pub fn dist4(unk: f64, eos: f64, a: f64, b: f64) -> ProbDist {
    ProbDist {
        probs: vec![unk, 0.0, eos, 0.0, a, b],
    }
}

/// Embed per-event values into a full-vocab vector: ids 0 and 2 are the
/// reserved event tokens, ids 4.. the added ones; 1 and 3 stay zero.
pub fn embed_events(values: &[f64]) -> ProbDist {
    assert!(values.len() >= 2);
    let mut probs = vec![0.0; values.len() + 2];
    probs[0] = values[0];
    probs[2] = values[1];
    for (i, &v) in values[2..].iter().enumerate() {
        probs[4 + i] = v;
    }
    ProbDist { probs }
}

/// Event-token entries of a full-vocab vector, in id order.
pub fn event_values(dist: &ProbDist) -> Vec<f64> {
    let mut out = vec![dist.probs[0], dist.probs[2]];
    out.extend_from_slice(&dist.probs[4..]);
    out
}
