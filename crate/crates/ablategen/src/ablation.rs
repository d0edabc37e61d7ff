//! Factual-ablation evaluation: score one target under two groundings (the
//! entailing one and an ablated one with strictly less relevant
//! information) and aggregate how often, and by what margin, the model
//! prefers the entailing grounding.

use serde::{Deserialize, Serialize};

use crate::decode::{policy_dist, DecodingPolicy};
use crate::error::{Error, Result};
use crate::lm::{score_sequence, GroundedLM};
use crate::vocab::tokenize_frozen;

/// One evaluation instance: `grounding` entails the target, while
/// `grounding_ablated` carries a strict subset of the relevant facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationExample {
    pub grounding: String,
    pub grounding_ablated: String,
    pub context: String,
    pub target: String,
}

impl AblationExample {
    pub fn validate(&self) -> Result<()> {
        if self.target.trim().is_empty() {
            return Err(Error::InvalidArgument(
                "ablation example target must be non-empty".into(),
            ));
        }
        if self.grounding == self.grounding_ablated {
            return Err(Error::InvalidArgument(
                "grounding and ablated grounding must differ".into(),
            ));
        }
        Ok(())
    }
}

/// Target log-probability under both groundings (nats, totals with the
/// `<eos>` step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub logp_g: f64,
    pub logp_g_ablated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginAccuracy {
    pub margin_nats: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub n: usize,
    pub accuracy: f64,
    pub margin_acc: Vec<MarginAccuracy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<ScoredPair>,
}

/// Parse a margin given in nats ("4.6052"), as "ln:4.6052", or as a
/// power of ten "log10:2" (meaning a 100x probability ratio).
pub fn parse_margin(s: &str) -> Result<f64> {
    let parse = |v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad margin value {v:?}")))
    };
    let nats = if let Some(rest) = s.strip_prefix("log10:") {
        parse(rest)? * std::f64::consts::LN_10
    } else if let Some(rest) = s.strip_prefix("ln:") {
        parse(rest)?
    } else {
        parse(s)?
    };
    if !nats.is_finite() || nats < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "margin must be finite and >= 0, got {nats}"
        )));
    }
    Ok(nats)
}

/// Default margin grid: 100x and 1000x probability ratios.
pub fn default_margins() -> Vec<f64> {
    vec![100.0f64.ln(), 1000.0f64.ln()]
}

/// Wider grid for verbose reports.
pub fn verbose_margins() -> Vec<f64> {
    vec![0.0, 10.0f64.ln(), 100.0f64.ln(), 1000.0f64.ln()]
}

/// Score the target under the policy distribution with the entailing and
/// the ablated grounding. Under the base policy this is plain sequence
/// scoring; under a transform the target is scored against the transformed
/// distributions, making inference-time policies directly comparable.
pub fn score_pair(
    grounded: &GroundedLM,
    ungrounded: &GroundedLM,
    policy: &DecodingPolicy,
    ex: &AblationExample,
) -> Result<ScoredPair> {
    let vocab = grounded.vocab();
    let context = tokenize_frozen(&ex.context, vocab);
    let target = tokenize_frozen(&ex.target, vocab);
    if target.is_empty() {
        return Err(Error::EmptyInput("ablation example target"));
    }
    let score_under = |grounding_text: &str| -> Result<f64> {
        let grounding = tokenize_frozen(grounding_text, vocab);
        score_sequence(&target, true, |prefix| {
            policy_dist(grounded, ungrounded, policy, &grounding, &context, prefix)
        })
    };
    Ok(ScoredPair {
        logp_g: score_under(&ex.grounding)?,
        logp_g_ablated: score_under(&ex.grounding_ablated)?,
    })
}

/// Fraction of pairs preferring the entailing grounding strictly; ties
/// count as failures.
pub fn accuracy(pairs: &[ScoredPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    let wins = pairs.iter().filter(|p| p.logp_g > p.logp_g_ablated).count();
    Ok(wins as f64 / pairs.len() as f64)
}

/// Fraction of pairs preferring the entailing grounding by more than
/// margin `m` (nats).
pub fn margin_accuracy(pairs: &[ScoredPair], m: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    if m.is_nan() || m < 0.0 {
        return Err(Error::InvalidArgument("margin must be >= 0".into()));
    }
    let wins = pairs
        .iter()
        .filter(|p| p.logp_g > m + p.logp_g_ablated)
        .count();
    Ok(wins as f64 / pairs.len() as f64)
}

/// Score every example and aggregate accuracy plus margin-accuracy at each
/// requested margin (sorted, deduplicated). Per-example failures abort
/// with the example index.
pub fn evaluate(
    grounded: &GroundedLM,
    ungrounded: &GroundedLM,
    policy: &DecodingPolicy,
    dataset: &[AblationExample],
    margins: &[f64],
) -> Result<AblationReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("ablation dataset"));
    }
    let mut pairs = Vec::with_capacity(dataset.len());
    for (index, ex) in dataset.iter().enumerate() {
        let pair = score_pair(grounded, ungrounded, policy, ex).map_err(|e| Error::AtExample {
            index,
            source: Box::new(e),
        })?;
        pairs.push(pair);
    }
    let mut grid: Vec<f64> = margins.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid.dedup();
    let mut margin_acc = Vec::with_capacity(grid.len());
    for &m in &grid {
        margin_acc.push(MarginAccuracy {
            margin_nats: m,
            value: margin_accuracy(&pairs, m)?,
        });
    }
    Ok(AblationReport {
        n: pairs.len(),
        accuracy: accuracy(&pairs)?,
        margin_acc,
        pairs,
    })
}
