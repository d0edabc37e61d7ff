//! Corpus-level lexical overlap metrics over token id sequences, single
//! reference per candidate.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, TokenSeq};

/// One candidate/reference pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub candidate: TokenSeq,
    pub reference: TokenSeq,
}

fn ngram_counts(ids: &[TokenId], n: usize) -> HashMap<&[TokenId], u64> {
    let mut counts: HashMap<&[TokenId], u64> = HashMap::new();
    if ids.len() >= n {
        for w in ids.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn validate(pairs: &[EvalPair], max_n: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("evaluation pairs"));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be >= 1".into()));
    }
    if pairs.iter().any(|p| p.reference.is_empty()) {
        return Err(Error::InvalidArgument(
            "every reference must be non-empty".into(),
        ));
    }
    Ok(())
}

/// Corpus BLEU: clipped modified n-gram precisions pooled over the corpus,
/// geometric mean over orders `1..=max_n`, times the brevity penalty
/// `exp(1 - r/c)` when the candidate side is shorter. Any zero pooled
/// precision makes the score 0 unless `smooth` replaces it with 1e-9.
pub fn bleu(pairs: &[EvalPair], max_n: usize, smooth: bool) -> Result<f64> {
    validate(pairs, max_n)?;
    let cand_len: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    let ref_len: usize = pairs.iter().map(|p| p.reference.len()).sum();
    if cand_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let mut matched = 0u64;
        let mut total = 0u64;
        for pair in pairs {
            let cand = ngram_counts(pair.candidate.ids(), n);
            let reference = ngram_counts(pair.reference.ids(), n);
            for (gram, &c) in &cand {
                let r = reference.get(gram).copied().unwrap_or(0);
                matched += c.min(r);
            }
            total += pair.candidate.len().saturating_sub(n - 1) as u64;
        }
        let mut p = if total > 0 {
            matched as f64 / total as f64
        } else {
            0.0
        };
        if p == 0.0 {
            if !smooth {
                return Ok(0.0);
            }
            p = 1e-9;
        }
        log_precision_sum += p.ln();
    }

    let brevity = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(brevity * (log_precision_sum / max_n as f64).exp())
}

/// Corpus NIST: matched n-grams are weighted by their information content
/// `log2(count(prefix) / count(ngram))` under reference-side corpus counts
/// (the unigram denominator is the total reference token count), averaged
/// per candidate n-gram and summed over orders, times the NIST brevity
/// factor, which reaches 0.5 when the candidate is two thirds of the
/// reference length.
pub fn nist(pairs: &[EvalPair], max_n: usize) -> Result<f64> {
    validate(pairs, max_n)?;
    let cand_len: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    let ref_len: usize = pairs.iter().map(|p| p.reference.len()).sum();
    if cand_len == 0 {
        return Ok(0.0);
    }

    // Pooled reference-side counts per order, for information weights.
    let mut ref_counts: Vec<HashMap<&[TokenId], u64>> = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let mut counts: HashMap<&[TokenId], u64> = HashMap::new();
        for pair in pairs {
            if pair.reference.len() >= n {
                for w in pair.reference.ids().windows(n) {
                    *counts.entry(w).or_insert(0) += 1;
                }
            }
        }
        ref_counts.push(counts);
    }

    let info = |gram: &[TokenId]| -> f64 {
        let n = gram.len();
        let full = ref_counts[n - 1].get(gram).copied().unwrap_or(0) as f64;
        let prefix = if n == 1 {
            ref_len as f64
        } else {
            ref_counts[n - 2].get(&gram[..n - 1]).copied().unwrap_or(0) as f64
        };
        (prefix / full).log2()
    };

    let mut score = 0.0;
    for n in 1..=max_n {
        let mut weighted = 0.0;
        let mut total = 0u64;
        for pair in pairs {
            let cand = ngram_counts(pair.candidate.ids(), n);
            let reference = ngram_counts(pair.reference.ids(), n);
            for (gram, &c) in &cand {
                let r = reference.get(gram).copied().unwrap_or(0);
                let hits = c.min(r);
                if hits > 0 {
                    weighted += hits as f64 * info(gram);
                }
            }
            total += pair.candidate.len().saturating_sub(n - 1) as u64;
        }
        if total > 0 {
            score += weighted / total as f64;
        }
    }

    let ratio = (cand_len as f64 / ref_len as f64).min(1.0);
    let beta = 0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2);
    let brevity = (beta * ratio.ln().powi(2)).exp();
    Ok(brevity * score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(candidate: Vec<TokenId>, reference: Vec<TokenId>) -> EvalPair {
        EvalPair {
            candidate: TokenSeq(candidate),
            reference: TokenSeq(reference),
        }
    }

    #[test]
    fn bleu_of_exact_match_is_one() {
        let pairs = vec![
            pair(vec![1, 2, 3, 4, 5], vec![1, 2, 3, 4, 5]),
            pair(vec![9, 8, 7, 6], vec![9, 8, 7, 6]),
        ];
        let score = bleu(&pairs, 4, false).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_of_disjoint_tokens_is_zero() {
        let pairs = vec![pair(vec![1, 2, 3, 4], vec![5, 6, 7, 8])];
        assert_eq!(bleu(&pairs, 4, false).unwrap(), 0.0);
    }

    #[test]
    fn bleu_clips_repeated_candidate_tokens() {
        // candidate "the the the the" vs reference "the cat": clipped
        // unigram precision 1/4, no brevity penalty (4 > 2).
        let the = 10;
        let cat = 11;
        let pairs = vec![pair(vec![the, the, the, the], vec![the, cat])];
        let score = bleu(&pairs, 1, false).unwrap();
        assert!((score - 0.25).abs() < 1e-9);
    }

    #[test]
    fn bleu_smoothing_rescues_zero_precisions() {
        // one shared unigram, no shared bigram
        let pairs = vec![pair(vec![1, 2], vec![1, 3])];
        assert_eq!(bleu(&pairs, 2, false).unwrap(), 0.0);
        let smoothed = bleu(&pairs, 2, true).unwrap();
        assert!(smoothed > 0.0 && smoothed < 0.01);
    }

    #[test]
    fn bleu_brevity_penalty_applies_to_short_candidates() {
        // candidate half the reference length, perfect precision:
        // BLEU = exp(1 - 2) = e^-1.
        let pairs = vec![pair(vec![1, 2], vec![1, 2, 3, 4])];
        let score = bleu(&pairs, 2, false).unwrap();
        assert!((score - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_rejects_bad_input() {
        assert!(bleu(&[], 4, false).is_err());
        let empty_ref = vec![pair(vec![1], vec![])];
        assert!(bleu(&empty_ref, 4, false).is_err());
        let ok = vec![pair(vec![1], vec![1])];
        assert!(bleu(&ok, 0, false).is_err());
    }

    #[test]
    fn nist_zero_matches_is_zero() {
        let pairs = vec![pair(vec![1, 2, 3], vec![4, 5, 6])];
        assert_eq!(nist(&pairs, 5).unwrap(), 0.0);
    }

    #[test]
    fn nist_self_match_hand_case() {
        // candidate == reference == "a b" as the whole corpus:
        // info(a) = info(b) = log2(2/1) = 1, info(a b) = log2(1/1) = 0,
        // so the order terms are 1 and 0 and brevity is 1.
        let pairs = vec![pair(vec![1, 2], vec![1, 2])];
        let score = nist(&pairs, 5).unwrap();
        assert!((score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nist_is_invariant_to_doubling_the_corpus() {
        let base = vec![
            pair(vec![1, 2, 3], vec![1, 2, 4]),
            pair(vec![5, 2], vec![5, 2, 3]),
        ];
        let mut doubled = base.clone();
        doubled.extend(base.clone());
        let a = nist(&base, 5).unwrap();
        let b = nist(&doubled, 5).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nist_brevity_factor_is_half_at_two_thirds_length() {
        // perfect-precision candidate at 2/3 of the reference length
        let pairs = vec![pair(vec![1, 2], vec![1, 2, 1])];
        // info(1) = log2(3/2), info(2) = log2(3/1); unigram term
        // (log2(1.5) + log2(3))/2, bigram term log2(2/1)/1 = 1.
        let unigram_term = ((3.0f64 / 2.0).log2() + 3.0f64.log2()) / 2.0;
        let bigram_term = 2.0f64.log2();
        let expected = 0.5 * (unigram_term + bigram_term);
        let score = nist(&pairs, 2).unwrap();
        assert!((score - expected).abs() < 1e-9, "score {score} vs {expected}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn corpus_strategy() -> impl Strategy<Value = Vec<EvalPair>> {
            proptest::collection::vec(
                (
                    proptest::collection::vec(0u32..8, 1..12),
                    proptest::collection::vec(0u32..8, 4..12),
                )
                    .prop_map(|(c, r)| pair(c, r)),
                1..6,
            )
        }

        proptest! {
            #[test]
            fn bleu_invariant_under_relabeling(pairs in corpus_strategy()) {
                let relabeled: Vec<EvalPair> = pairs
                    .iter()
                    .map(|p| EvalPair {
                        candidate: TokenSeq(p.candidate.ids().iter().map(|&t| t * 7 + 100).collect()),
                        reference: TokenSeq(p.reference.ids().iter().map(|&t| t * 7 + 100).collect()),
                    })
                    .collect();
                let a = bleu(&pairs, 3, false).unwrap();
                let b = bleu(&relabeled, 3, false).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn self_match_bleu_is_one(refs in proptest::collection::vec(
                proptest::collection::vec(0u32..6, 4..10), 1..5)) {
                let pairs: Vec<EvalPair> = refs
                    .iter()
                    .map(|r| pair(r.clone(), r.clone()))
                    .collect();
                prop_assert!((bleu(&pairs, 4, false).unwrap() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn nist_self_match_is_maximal_for_equal_length(
                reference in proptest::collection::vec(0u32..5, 3..10),
                other in proptest::collection::vec(0u32..5, 10),
            ) {
                let candidate: Vec<TokenId> = other[..reference.len()].to_vec();
                let self_pairs = vec![pair(reference.clone(), reference.clone())];
                let other_pairs = vec![pair(candidate, reference)];
                let self_score = nist(&self_pairs, 5).unwrap();
                let other_score = nist(&other_pairs, 5).unwrap();
                prop_assert!(other_score <= self_score + 1e-12);
            }
        }
    }
}
