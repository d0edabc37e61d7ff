//! Add-k smoothed n-gram model over token ids.
//!
//! Context tuples have length `order - 1`. Structural markers (`<bos>`,
//! `<sep>`) may appear inside context tuples but are never counted as
//! prediction targets, so every emitted distribution is supported on
//! event tokens only and sums to one.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lm::ProbDist;
use crate::vocab::{TokenId, TokenSeq, Vocab, BOS, EOS, SEP};

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    k: f64,
    vocab: Vocab,
    counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>>,
    context_totals: HashMap<Vec<TokenId>, u64>,
}

impl NGramModel {
    /// Count (context, next) pairs over the corpus. Each sequence is padded
    /// with `order - 1` leading `<bos>` markers and one terminal `<eos>`.
    /// Pairs whose target is `<bos>` or `<sep>` are skipped so that emitted
    /// distributions stay supported on event tokens.
    pub fn train(corpus: &[TokenSeq], vocab: Vocab, order: usize, k: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument("n-gram order must be >= 1".into()));
        }
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::InvalidArgument(
                "smoothing constant k must be finite and > 0".into(),
            ));
        }
        let mut model = NGramModel {
            order,
            k,
            vocab,
            counts: HashMap::new(),
            context_totals: HashMap::new(),
        };
        for seq in corpus {
            model.count_sequence(seq.ids());
        }
        Ok(model)
    }

    fn count_sequence(&mut self, ids: &[TokenId]) {
        let n = self.order;
        let mut padded = Vec::with_capacity(ids.len() + n);
        padded.extend(std::iter::repeat_n(BOS, n - 1));
        padded.extend_from_slice(ids);
        padded.push(EOS);
        for i in (n - 1)..padded.len() {
            let next = padded[i];
            if next == BOS || next == SEP {
                continue;
            }
            let ctx = padded[i - (n - 1)..i].to_vec();
            *self
                .counts
                .entry(ctx.clone())
                .or_default()
                .entry(next)
                .or_insert(0) += 1;
            *self.context_totals.entry(ctx).or_insert(0) += 1;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Add-k distribution over event tokens after `history`. The history is
    /// left-padded with `<bos>` when shorter than `order - 1`; only the last
    /// `order - 1` ids matter.
    pub fn dist_after(&self, history: &[TokenId]) -> ProbDist {
        let need = self.order - 1;
        let mut ctx = Vec::with_capacity(need);
        if history.len() >= need {
            ctx.extend_from_slice(&history[history.len() - need..]);
        } else {
            ctx.extend(std::iter::repeat_n(BOS, need - history.len()));
            ctx.extend_from_slice(history);
        }
        let total = self.context_totals.get(&ctx).copied().unwrap_or(0) as f64;
        let ctx_counts = self.counts.get(&ctx);
        let event_len = self.vocab.event_len() as f64;
        let denom = total + self.k * event_len;
        let mut probs = vec![0.0; self.vocab.len()];
        for id in 0..self.vocab.len() as TokenId {
            if id == BOS || id == SEP {
                continue;
            }
            let c = ctx_counts
                .and_then(|m| m.get(&id))
                .copied()
                .unwrap_or(0) as f64;
            probs[id as usize] = (c + self.k) / denom;
        }
        ProbDist { probs }
    }

    /// All stored counts as sorted `(context, token, count)` triples.
    pub fn count_triples(&self) -> Vec<(Vec<TokenId>, TokenId, u64)> {
        let mut triples: Vec<(Vec<TokenId>, TokenId, u64)> = self
            .counts
            .iter()
            .flat_map(|(ctx, m)| m.iter().map(|(&t, &c)| (ctx.clone(), t, c)))
            .collect();
        triples.sort();
        triples
    }

    /// Rebuild a model from serialized triples; context totals are derived.
    pub fn from_triples(
        triples: Vec<(Vec<TokenId>, TokenId, u64)>,
        vocab: Vocab,
        order: usize,
        k: f64,
    ) -> Result<Self> {
        if order < 1 || !k.is_finite() || k <= 0.0 {
            return Err(Error::BadFormat("bad order or k in model file".into()));
        }
        let mut counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
        let mut context_totals: HashMap<Vec<TokenId>, u64> = HashMap::new();
        for (ctx, token, count) in triples {
            if ctx.len() != order - 1 {
                return Err(Error::BadFormat(format!(
                    "context tuple of length {} in a model of order {}",
                    ctx.len(),
                    order
                )));
            }
            for &id in ctx.iter().chain([&token]) {
                if id as usize >= vocab.len() {
                    return Err(Error::BadFormat(format!("token id {id} out of range")));
                }
            }
            if token == BOS || token == SEP {
                return Err(Error::BadFormat(
                    "structural marker stored as a prediction target".into(),
                ));
            }
            *counts.entry(ctx.clone()).or_default().entry(token).or_insert(0) += count;
            *context_totals.entry(ctx).or_insert(0) += count;
        }
        Ok(NGramModel {
            order,
            k,
            vocab,
            counts,
            context_totals,
        })
    }
}
