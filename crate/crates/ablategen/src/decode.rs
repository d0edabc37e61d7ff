//! Inference-time scoring transforms and the sampling loop.
//!
//! The per-token support score is the log-ratio of grounded to ungrounded
//! next-token probability. Two transforms fold it back into a sampling
//! distribution: interpolation (a product of experts between the grounded
//! distribution and a softmax of the support score) and addition (rewarding
//! supported tokens on top of the grounded distribution). Both are plain
//! distribution maps, so targets can be scored under them exactly like
//! under the base model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{GroundedLM, ProbDist};
use crate::vocab::{TokenId, TokenSeq, BOS, EOS, SEP};

/// Probability floor applied before taking logs, keeping support scores
/// finite on zero-probability tokens.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Base,
    PmiInterp,
    PmiAdd,
}

/// Decoding policy: the base grounded distribution or one of the two
/// support-score transforms with mixing weight `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingPolicy {
    pub kind: PolicyKind,
    pub alpha: f64,
}

impl DecodingPolicy {
    pub fn base() -> Self {
        DecodingPolicy {
            kind: PolicyKind::Base,
            alpha: 0.0,
        }
    }

    pub fn pmi_interp(alpha: f64) -> Result<Self> {
        Self::with_alpha(PolicyKind::PmiInterp, alpha)
    }

    pub fn pmi_add(alpha: f64) -> Result<Self> {
        Self::with_alpha(PolicyKind::PmiAdd, alpha)
    }

    pub fn with_alpha(kind: PolicyKind, alpha: f64) -> Result<Self> {
        let policy = DecodingPolicy { kind, alpha };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != PolicyKind::Base && !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument("alpha must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop at `<eos>` or after a sentence-final punctuation token (., !, ?).
    Sentence,
    /// Stop only at `<eos>` (or the token budget).
    EosOnly,
}

/// Nucleus-sampling configuration. The seed initializes a private ChaCha8
/// stream, so equal inputs give equal outputs; cross-platform determinism
/// holds within this implementation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: u64,
    pub stop: StopRule,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidArgument("top_p must be in (0, 1]".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidArgument("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

fn is_event_id(id: usize) -> bool {
    id != BOS as usize && id != SEP as usize
}

/// Per-token support score: elementwise `ln(p_grounded / p_ungrounded)`
/// with both sides floored at [`PROB_FLOOR`]. Structural-marker entries are
/// set to negative infinity and excluded by the transforms.
pub fn pmi_score(p_grounded: &ProbDist, p_ungrounded: &ProbDist) -> Result<Vec<f64>> {
    if p_grounded.len() != p_ungrounded.len() {
        return Err(Error::VocabMismatch {
            expected: p_grounded.len(),
            got: p_ungrounded.len(),
        });
    }
    Ok(p_grounded
        .probs
        .iter()
        .zip(&p_ungrounded.probs)
        .enumerate()
        .map(|(id, (&p, &q))| {
            if is_event_id(id) {
                (p.max(PROB_FLOOR) / q.max(PROB_FLOOR)).ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect())
}

fn softmax_over_events(logits: &[f64]) -> ProbDist {
    let mut max = f64::NEG_INFINITY;
    for (id, &l) in logits.iter().enumerate() {
        if is_event_id(id) && l > max {
            max = l;
        }
    }
    let mut probs = vec![0.0; logits.len()];
    let mut sum = 0.0;
    for (id, &l) in logits.iter().enumerate() {
        if is_event_id(id) {
            let e = (l - max).exp();
            probs[id] = e;
            sum += e;
        }
    }
    for p in &mut probs {
        *p /= sum;
    }
    ProbDist { probs }
}

fn transformed(p_grounded: &ProbDist, s_pmi: &[f64], base_weight: f64, alpha: f64) -> Result<ProbDist> {
    if p_grounded.len() != s_pmi.len() {
        return Err(Error::VocabMismatch {
            expected: p_grounded.len(),
            got: s_pmi.len(),
        });
    }
    let logits: Vec<f64> = p_grounded
        .probs
        .iter()
        .zip(s_pmi)
        .enumerate()
        .map(|(id, (&p, &s))| {
            if is_event_id(id) {
                base_weight * p.max(PROB_FLOOR).ln() + alpha * s
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    Ok(softmax_over_events(&logits))
}

/// Product-of-experts mixture: softmax of
/// `(1 - alpha) * log p_grounded + alpha * s_pmi` over event tokens.
pub fn pmi_interpolate(p_grounded: &ProbDist, s_pmi: &[f64], alpha: f64) -> Result<ProbDist> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must be in [0, 1]".into()));
    }
    transformed(p_grounded, s_pmi, 1.0 - alpha, alpha)
}

/// Support reward: softmax of `log p_grounded + alpha * s_pmi` over event
/// tokens.
pub fn pmi_add(p_grounded: &ProbDist, s_pmi: &[f64], alpha: f64) -> Result<ProbDist> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must be in [0, 1]".into()));
    }
    transformed(p_grounded, s_pmi, 1.0, alpha)
}

/// Nucleus filter: keep the minimal prefix of tokens, sorted by descending
/// probability (ties by ascending id), whose cumulative mass reaches
/// `top_p`; zero the rest and renormalize.
pub fn top_p_filter(dist: &ProbDist, top_p: f64) -> ProbDist {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| {
        dist.probs[b]
            .partial_cmp(&dist.probs[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept = vec![false; dist.len()];
    let mut cum = 0.0;
    for &id in &order {
        if dist.probs[id] <= 0.0 {
            break; // zero-mass tokens can never help reach the threshold
        }
        kept[id] = true;
        cum += dist.probs[id];
        if cum >= top_p {
            break;
        }
    }
    let mut probs: Vec<f64> = dist
        .probs
        .iter()
        .enumerate()
        .map(|(id, &p)| if kept[id] { p } else { 0.0 })
        .collect();
    for p in &mut probs {
        *p /= cum;
    }
    ProbDist { probs }
}

/// Next-token distribution under a policy. Base returns the grounded
/// model's distribution; the transforms compose it with the support score
/// against the ungrounded model. This one distribution is used both for
/// sampling and for scoring targets under the policy.
pub fn policy_dist(
    grounded: &GroundedLM,
    ungrounded: &GroundedLM,
    policy: &DecodingPolicy,
    grounding: &TokenSeq,
    context: &TokenSeq,
    prefix: &TokenSeq,
) -> Result<ProbDist> {
    policy.validate()?;
    let p_grounded = grounded.next_token_dist(grounding, context, prefix);
    if policy.kind == PolicyKind::Base {
        return Ok(p_grounded);
    }
    if grounded.vocab().len() != ungrounded.vocab().len() {
        return Err(Error::VocabMismatch {
            expected: grounded.vocab().len(),
            got: ungrounded.vocab().len(),
        });
    }
    let p_ungrounded = ungrounded.next_token_dist(grounding, context, prefix);
    let s = pmi_score(&p_grounded, &p_ungrounded)?;
    match policy.kind {
        PolicyKind::PmiInterp => pmi_interpolate(&p_grounded, &s, policy.alpha),
        PolicyKind::PmiAdd => pmi_add(&p_grounded, &s, policy.alpha),
        PolicyKind::Base => unreachable!(),
    }
}

fn sample_from(dist: &ProbDist, rng: &mut ChaCha8Rng) -> TokenId {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (id, &p) in dist.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = id;
        cum += p;
        if u < cum {
            return id as TokenId;
        }
    }
    last_positive as TokenId
}

/// Sample one continuation: repeatedly draw from the nucleus-filtered
/// policy distribution until `<eos>`, a sentence-final punctuation token
/// (under [`StopRule::Sentence`]), or the token budget. A fixed seed makes
/// the output deterministic.
pub fn generate(
    grounded: &GroundedLM,
    ungrounded: &GroundedLM,
    policy: &DecodingPolicy,
    sampler: &SamplerConfig,
    grounding: &TokenSeq,
    context: &TokenSeq,
) -> Result<TokenSeq> {
    sampler.validate()?;
    policy.validate()?;
    let stop_ids: Vec<TokenId> = [".", "!", "?"]
        .iter()
        .filter_map(|t| grounded.vocab().id(t))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut out = TokenSeq::default();
    for _ in 0..sampler.max_tokens {
        let dist = policy_dist(grounded, ungrounded, policy, grounding, context, &out)?;
        let filtered = top_p_filter(&dist, sampler.top_p);
        let token = sample_from(&filtered, &mut rng);
        if token == EOS {
            break;
        }
        out.0.push(token);
        if sampler.stop == StopRule::Sentence && stop_ids.contains(&token) {
            break;
        }
    }
    Ok(out)
}
