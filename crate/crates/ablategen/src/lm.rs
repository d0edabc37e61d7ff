//! Conditional language models: a background n-gram mixed with a
//! grounding-cache unigram.
//!
//! The background model conditions on `[context, <sep>, prefix]` and never
//! sees the grounding; the grounding enters only through the cache. A model
//! with the cache disabled is therefore the matching ungrounded estimator
//! of the same text distribution.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::NGramModel;
use crate::vocab::{tokenize_build, Example, TokenId, TokenSeq, Vocab, BOS, EOS, SEP};

pub const MODEL_FORMAT_VERSION: &str = "ablategen.model.v1";

/// Probability vector over the full vocabulary. Entries for `<bos>` and
/// `<sep>` are always zero; the rest sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    pub probs: Vec<f64>,
}

impl ProbDist {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Highest-probability token id, ties broken by ascending id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0usize;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as TokenId
    }

    /// Check the distribution invariants: entries in [0, 1], zero mass on
    /// structural markers, total within `tol` of one.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.probs.len() < 4 {
            return Err(Error::Internal("distribution shorter than vocab".into()));
        }
        if self.probs[BOS as usize] != 0.0 || self.probs[SEP as usize] != 0.0 {
            return Err(Error::Internal(
                "distribution assigns mass to a structural marker".into(),
            ));
        }
        if self.probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Internal("probability outside [0, 1]".into()));
        }
        if (self.sum() - 1.0).abs() > tol {
            return Err(Error::Internal(format!(
                "distribution sums to {}, not 1",
                self.sum()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Mix the background with a unigram over grounding tokens.
    GroundingCache,
    /// Ignore the grounding entirely (ungrounded estimator).
    None,
}

/// Hyperparameters for fitting a [`GroundedLM`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmParams {
    pub order: usize,
    pub k: f64,
    pub lambda: f64,
    pub cache_mode: CacheMode,
}

impl Default for LmParams {
    fn default() -> Self {
        LmParams {
            order: 3,
            k: 0.1,
            lambda: 0.5,
            cache_mode: CacheMode::GroundingCache,
        }
    }
}

impl LmParams {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidArgument("order must be >= 1".into()));
        }
        if !self.k.is_finite() || self.k <= 0.0 {
            return Err(Error::InvalidArgument("k must be finite and > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument("lambda must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Conditional model P(t | grounding, context, prefix): background n-gram
/// over `[context, <sep>, prefix]` mixed with a grounding-cache unigram.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedLM {
    background: NGramModel,
    lambda: f64,
    cache_mode: CacheMode,
}

impl GroundedLM {
    pub fn new(background: NGramModel, lambda: f64, cache_mode: CacheMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument("lambda must be in [0, 1]".into()));
        }
        Ok(GroundedLM {
            background,
            lambda,
            cache_mode,
        })
    }

    /// Fit on a corpus of examples: the vocabulary is built over grounding,
    /// context and target text; the background n-gram is trained on the
    /// joined sequences `[context, <sep>, target]`.
    pub fn fit(corpus: &[Example], params: &LmParams) -> Result<Self> {
        params.validate()?;
        let mut vocab = Vocab::new();
        let mut seqs = Vec::with_capacity(corpus.len());
        for ex in corpus {
            ex.validate()?;
            // Grounding tokens enter the vocab so the cache can see them.
            tokenize_build(&ex.grounding, &mut vocab);
            let context = tokenize_build(&ex.context, &mut vocab);
            let target = tokenize_build(&ex.target, &mut vocab);
            let mut joined = context.0;
            joined.push(SEP);
            joined.extend_from_slice(target.ids());
            seqs.push(TokenSeq(joined));
        }
        let background = NGramModel::train(&seqs, vocab, params.order, params.k)?;
        GroundedLM::new(background, params.lambda, params.cache_mode)
    }

    pub fn vocab(&self) -> &Vocab {
        self.background.vocab()
    }

    pub fn background(&self) -> &NGramModel {
        &self.background
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cache_mode(&self) -> CacheMode {
        self.cache_mode
    }

    /// The matching ungrounded estimator: same background, cache disabled.
    pub fn ungrounded_view(&self) -> GroundedLM {
        GroundedLM {
            background: self.background.clone(),
            lambda: self.lambda,
            cache_mode: CacheMode::None,
        }
    }

    /// Relative frequency of event tokens in the grounding, or `None` when
    /// the grounding holds no event tokens. Unsmoothed: tokens outside the
    /// grounding get exactly zero.
    fn cache_dist(&self, grounding: &TokenSeq) -> Option<Vec<f64>> {
        let mut counts: HashMap<TokenId, u64> = HashMap::new();
        let mut total = 0u64;
        for &id in grounding.ids() {
            if self.vocab().is_event(id) {
                *counts.entry(id).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return None;
        }
        let mut probs = vec![0.0; self.vocab().len()];
        for (id, c) in counts {
            probs[id as usize] = c as f64 / total as f64;
        }
        Some(probs)
    }

    /// Next-token distribution given grounding, context and target prefix.
    pub fn next_token_dist(
        &self,
        grounding: &TokenSeq,
        context: &TokenSeq,
        prefix: &TokenSeq,
    ) -> ProbDist {
        let mut history = Vec::with_capacity(context.len() + 1 + prefix.len());
        history.extend_from_slice(context.ids());
        history.push(SEP);
        history.extend_from_slice(prefix.ids());
        let background = self.background.dist_after(&history);
        if self.cache_mode == CacheMode::None || self.lambda == 0.0 {
            return background;
        }
        let cache = match self.cache_dist(grounding) {
            Some(c) => c,
            None => return background,
        };
        let probs = background
            .probs
            .iter()
            .zip(&cache)
            .map(|(&bg, &ca)| self.lambda * ca + (1.0 - self.lambda) * bg)
            .collect();
        ProbDist { probs }
    }

    /// Total log-probability (nats) of `target` given grounding and context,
    /// left-to-right. With `include_eos`, adds the probability of `<eos>`
    /// after the full target.
    pub fn sequence_logprob(
        &self,
        grounding: &TokenSeq,
        context: &TokenSeq,
        target: &TokenSeq,
        include_eos: bool,
    ) -> Result<f64> {
        score_sequence(target, include_eos, |prefix| {
            Ok(self.next_token_dist(grounding, context, prefix))
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION.to_string(),
            order: self.background.order(),
            k: self.background.k(),
            lambda: self.lambda,
            cache_mode: self.cache_mode,
            vocab: self.vocab().tokens().to_vec(),
            counts: self.background.count_triples(),
        };
        fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&raw)
            .map_err(|e| Error::BadFormat(format!("model file {}: {e}", path.display())))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::BadFormat(format!(
                "unsupported model format {:?}",
                file.format_version
            )));
        }
        let vocab = Vocab::from_tokens(file.vocab)?;
        let background = NGramModel::from_triples(file.counts, vocab, file.order, file.k)?;
        GroundedLM::new(background, file.lambda, file.cache_mode)
    }
}

/// Sum log-probabilities of `target` under a per-prefix distribution
/// source. Shared by plain scoring and policy scoring.
pub(crate) fn score_sequence(
    target: &TokenSeq,
    include_eos: bool,
    mut dist_at: impl FnMut(&TokenSeq) -> Result<ProbDist>,
) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::EmptyInput("target sequence"));
    }
    let mut logprob = 0.0;
    let mut prefix = TokenSeq::new(Vec::with_capacity(target.len()));
    let mut steps: Vec<TokenId> = target.ids().to_vec();
    if include_eos {
        steps.push(EOS);
    }
    for (position, &token) in steps.iter().enumerate() {
        let dist = dist_at(&prefix)?;
        let p = match dist.probs.get(token as usize) {
            Some(&p) => p,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "token id {token} outside model vocabulary"
                )))
            }
        };
        if p <= 0.0 {
            return Err(Error::DegenerateProbability {
                token_id: token,
                position,
            });
        }
        logprob += p.ln();
        prefix.0.push(token);
    }
    Ok(logprob)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: String,
    order: usize,
    k: f64,
    lambda: f64,
    cache_mode: CacheMode,
    vocab: Vec<String>,
    counts: Vec<(Vec<TokenId>, TokenId, u64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::uniform_cache_model;
    use crate::vocab::tokenize_frozen;

    fn seq(model: &GroundedLM, text: &str) -> TokenSeq {
        tokenize_frozen(text, model.vocab())
    }

    #[test]
    fn cache_mixture_matches_hand_values() {
        // lambda=0.5, grounding=[b]: P(b) = 0.5*1 + 0.5*0.25 = 0.625,
        // P(a) = 0.5*0 + 0.5*0.25 = 0.125.
        let m = uniform_cache_model(0.5);
        let g = seq(&m, "b");
        let dist = m.next_token_dist(&g, &TokenSeq::default(), &TokenSeq::default());
        let a = m.vocab().id("a").unwrap() as usize;
        let b = m.vocab().id("b").unwrap() as usize;
        assert!((dist.probs[b] - 0.625).abs() < 1e-12);
        assert!((dist.probs[a] - 0.125).abs() < 1e-12);
        dist.validate(1e-9).unwrap();
    }

    #[test]
    fn lambda_zero_returns_background_bitwise() {
        let m = uniform_cache_model(0.0);
        let g = seq(&m, "b");
        let mixed = m.next_token_dist(&g, &TokenSeq::default(), &TokenSeq::default());
        let background = m.background().dist_after(&[SEP]);
        assert_eq!(mixed.probs, background.probs);
    }

    #[test]
    fn empty_grounding_returns_background() {
        let m = uniform_cache_model(0.7);
        let empty = TokenSeq::default();
        let mixed = m.next_token_dist(&empty, &TokenSeq::default(), &TokenSeq::default());
        let background = m.background().dist_after(&[SEP]);
        assert_eq!(mixed.probs, background.probs);
    }

    #[test]
    fn cache_mode_none_ignores_grounding() {
        let m = uniform_cache_model(0.5).ungrounded_view();
        let g = seq(&m, "b b b");
        let dist = m.next_token_dist(&g, &TokenSeq::default(), &TokenSeq::default());
        let b = m.vocab().id("b").unwrap() as usize;
        assert!((dist.probs[b] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sequence_logprob_of_uniform_model() {
        // Three uniform steps: 3 * ln(0.25) = -4.1589.
        let m = uniform_cache_model(0.0);
        let target = seq(&m, "a b a");
        let lp = m
            .sequence_logprob(&TokenSeq::default(), &TokenSeq::default(), &target, false)
            .unwrap();
        assert!((lp - 3.0 * 0.25f64.ln()).abs() < 1e-12);
        assert!((lp + 4.158883083359672).abs() < 1e-9);
    }

    #[test]
    fn sequence_logprob_single_token_and_cache_value() {
        let m = uniform_cache_model(0.5);
        let g = seq(&m, "b");
        let target = seq(&m, "b");
        let lp = m
            .sequence_logprob(&g, &TokenSeq::default(), &target, false)
            .unwrap();
        assert!((lp - 0.625f64.ln()).abs() < 1e-12);
        assert!((lp + 0.4700036292457356).abs() < 1e-9);
    }

    #[test]
    fn sequence_logprob_rejects_empty_target() {
        let m = uniform_cache_model(0.5);
        let err = m.sequence_logprob(
            &TokenSeq::default(),
            &TokenSeq::default(),
            &TokenSeq::default(),
            true,
        );
        assert!(matches!(err, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn structural_marker_in_target_is_degenerate() {
        let m = uniform_cache_model(0.5);
        let target = TokenSeq(vec![SEP]);
        let err = m.sequence_logprob(&TokenSeq::default(), &TokenSeq::default(), &target, false);
        assert!(matches!(err, Err(Error::DegenerateProbability { .. })));
    }

    #[test]
    fn next_token_dist_is_pure() {
        let m = uniform_cache_model(0.31);
        let g = seq(&m, "a b b");
        let c = seq(&m, "a");
        let p = seq(&m, "b a");
        let d1 = m.next_token_dist(&g, &c, &p);
        let d2 = m.next_token_dist(&g, &c, &p);
        assert_eq!(d1.probs, d2.probs);
    }

    #[test]
    fn cache_effect_is_monotone_in_lambda() {
        // Token present in grounding and absent from the training corpus:
        // its probability strictly increases with lambda.
        let mut last = 0.0;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let m = uniform_cache_model(lambda);
            let g = seq(&m, "b");
            let dist = m.next_token_dist(&g, &TokenSeq::default(), &TokenSeq::default());
            let p = dist.probs[m.vocab().id("b").unwrap() as usize];
            if lambda > 0.0 {
                assert!(p > last, "P(b) not increasing at lambda={lambda}");
            }
            last = p;
        }
    }

    #[test]
    fn fit_uses_context_sep_target_layout() {
        let corpus = vec![
            Example::new("the span is 300 meters", "the report says .", "the span is 300 meters ."),
        ];
        let m = GroundedLM::fit(&corpus, &LmParams::default()).unwrap();
        // Grounding tokens entered the vocab even though the background
        // never trains on them.
        assert!(m.vocab().id("meters").is_some());
        // First target token is conditioned on [..., <sep>].
        let context = tokenize_frozen("the report says .", m.vocab());
        let dist = m.next_token_dist(&TokenSeq::default(), &context, &TokenSeq::default());
        let the = m.vocab().id("the").unwrap() as usize;
        assert!(dist.probs[the] > 0.5, "trained continuation should dominate");
    }

    #[test]
    fn save_load_reproduces_scores_bitwise() {
        let corpus = vec![
            Example::new("a b", "a", "b a b"),
            Example::new("b", "", "a a"),
        ];
        let m = GroundedLM::fit(&corpus, &LmParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let loaded = GroundedLM::load(&path).unwrap();
        let g = tokenize_frozen("a b", m.vocab());
        let c = tokenize_frozen("a", m.vocab());
        let t = tokenize_frozen("b a b", m.vocab());
        let a = m.sequence_logprob(&g, &c, &t, true).unwrap();
        let b = loaded.sequence_logprob(&g, &c, &t, true).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn models_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<GroundedLM>();
        assert_send_sync::<NGramModel>();
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn token_text() -> impl Strategy<Value = String> {
            proptest::collection::vec("[a-e]{1,2}", 0..8).prop_map(|words| words.join(" "))
        }

        proptest! {
            #[test]
            fn emitted_distributions_are_valid(
                corpus_text in proptest::collection::vec(token_text(), 0..5),
                grounding_text in token_text(),
                context_text in token_text(),
                prefix_text in token_text(),
                order in 1usize..4,
                k in 0.01f64..2.0,
                lambda in 0.0f64..=1.0,
            ) {
                let mut vocab = Vocab::new();
                let corpus: Vec<TokenSeq> = corpus_text
                    .iter()
                    .map(|t| tokenize_build(t, &mut vocab))
                    .collect();
                let grounding = tokenize_build(&grounding_text, &mut vocab);
                let context = tokenize_build(&context_text, &mut vocab);
                let prefix = tokenize_build(&prefix_text, &mut vocab);
                let background = NGramModel::train(&corpus, vocab, order, k).unwrap();
                let model =
                    GroundedLM::new(background, lambda, CacheMode::GroundingCache).unwrap();
                let dist = model.next_token_dist(&grounding, &context, &prefix);
                prop_assert!(dist.validate(1e-9).is_ok());
            }
        }
    }

    #[test]
    fn brute_force_normalization_horizon_three() {
        // Over 4 event tokens and horizon 3, the 64 forced-continuation
        // sequence probabilities must sum to 1.
        let mut vocab = Vocab::new();
        vocab.add_or_get("a");
        vocab.add_or_get("b");
        let corpus = vec![
            tokenize_frozen("a b", &vocab),
            tokenize_frozen("b a b", &vocab),
        ];
        let background = NGramModel::train(&corpus, vocab, 2, 0.5).unwrap();
        let m = GroundedLM::new(background, 0.5, CacheMode::GroundingCache).unwrap();
        let g = tokenize_frozen("b", m.vocab());
        let events: Vec<TokenId> = (0..m.vocab().len() as TokenId)
            .filter(|&id| m.vocab().is_event(id))
            .collect();
        assert_eq!(events.len(), 4);
        let mut total = 0.0;
        for &t1 in &events {
            for &t2 in &events {
                for &t3 in &events {
                    let target = TokenSeq(vec![t1, t2, t3]);
                    let lp = m
                        .sequence_logprob(&g, &TokenSeq::default(), &target, false)
                        .unwrap();
                    total += lp.exp();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "total = {total}");
    }
}
