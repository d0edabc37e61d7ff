//! Construction of factual-ablation evaluation data.
//!
//! Synthetic edits perturb a single fact token (a number or a month) that
//! appears in both grounding and target, yielding a mirrored pair of
//! evaluation examples. Natural extraction turns revision-pair records
//! (one sentence and its reference replaced by another) into the same
//! mirrored examples, then applies quality filters.
//!
//! Fact edits are mechanical; whether an edited fact is obscure enough to
//! require the grounding, and free of commonsense violations, is left to a
//! human review pass. Deliberately fabricated facts should stay at
//! evaluation scale, so the command-line wrapper caps batch size by
//! default.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ablation::AblationExample;
use crate::error::{Error, Result};
use crate::vocab::{surface_tokens, Example};

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Numeric,
    Chronological,
}

/// One deterministic edit: the kind of fact to perturb plus the seed that
/// fixes the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRule {
    pub kind: EditKind,
    pub seed: u64,
}

/// A revision-pair record: context `c`, an old sentence/grounding pair and
/// the new pair that replaced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionPairRecord {
    pub context: String,
    pub old_target: String,
    pub new_target: String,
    pub old_grounding: String,
    pub new_grounding: String,
    pub source_urls: [String; 2],
}

/// Quality criteria for extracted examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub min_target_chars: usize,
    pub max_target_chars: usize,
    pub max_context_sentences: usize,
    /// Reject groundings whose fraction of characters outside
    /// alphanumeric/punctuation/whitespace reaches this value.
    pub max_junk_fraction: f64,
    pub max_line_chars: usize,
    /// When non-empty, both source URLs must resolve to one of these hosts.
    pub allowed_hosts: Vec<String>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            min_target_chars: 50,
            max_target_chars: 200,
            max_context_sentences: 3,
            max_junk_fraction: 0.1,
            max_line_chars: 2000,
            allowed_hosts: Vec::new(),
        }
    }
}

impl QualityConfig {
    /// Accept everything; useful for inspecting raw extraction output.
    pub fn permissive() -> Self {
        QualityConfig {
            min_target_chars: 0,
            max_target_chars: usize::MAX,
            max_context_sentences: usize::MAX,
            max_junk_fraction: f64::INFINITY,
            max_line_chars: usize::MAX,
            allowed_hosts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    InvalidRecord,
    UntrustedHost,
    TargetLength,
    ContextSentences,
    EmptyGrounding,
    Formatting,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::InvalidRecord => "invalid_record",
            RejectReason::UntrustedHost => "untrusted_host",
            RejectReason::TargetLength => "target_length",
            RejectReason::ContextSentences => "context_sentences",
            RejectReason::EmptyGrounding => "empty_grounding",
            RejectReason::Formatting => "formatting",
        }
    }
}

/// Extraction output: surviving examples in input order plus per-reason
/// drop counts (counted per candidate example, two per record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub examples: Vec<AblationExample>,
    pub rejected: BTreeMap<String, usize>,
}

fn split_word(word: &str) -> (String, String, String) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && !chars[start].is_alphanumeric() {
        start += 1;
    }
    while end > start && !chars[end - 1].is_alphanumeric() {
        end -= 1;
    }
    (
        chars[..start].iter().collect(),
        chars[start..end].iter().collect(),
        chars[end..].iter().collect(),
    )
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Replace every word whose core (after detaching surrounding punctuation)
/// equals `fact` case-insensitively. Whitespace and punctuation are kept
/// as-is, and the replacement inherits a leading capital.
fn replace_fact(text: &str, fact: &str, replacement: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if word.is_empty() {
            return;
        }
        let (lead, core, trail) = split_word(word);
        if core.eq_ignore_ascii_case(fact) {
            out.push_str(&lead);
            out.push_str(&match_case(&core, replacement));
            out.push_str(&trail);
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for ch in text.chars() {
        if ch.is_whitespace() {
            flush(&mut word, &mut out);
            out.push(ch);
        } else {
            word.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn is_digit_run(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

fn shift_month(month: &str, by: usize) -> Option<&'static str> {
    let idx = MONTHS.iter().position(|m| *m == month)?;
    Some(MONTHS[(idx + by) % 12])
}

/// First fact token (in target order) of the rule's kind that appears in
/// both grounding and target.
fn shared_fact(ex: &Example, kind: EditKind) -> Option<String> {
    let grounding: HashSet<String> = surface_tokens(&ex.grounding).into_iter().collect();
    let eligible = |t: &str| match kind {
        EditKind::Numeric => is_digit_run(t) && t.parse::<u128>().is_ok(),
        EditKind::Chronological => MONTHS.contains(&t),
    };
    surface_tokens(&ex.target)
        .into_iter()
        .find(|t| eligible(t) && grounding.contains(t))
}

/// Perturb one fact shared by grounding and target, producing the edited
/// texts `g'` and `y'` and the two mirrored evaluation examples
/// `(g, g', c, y)` and `(g', g, c, y')`.
pub fn synth_ablate(ex: &Example, rule: &EditRule) -> Result<(AblationExample, AblationExample)> {
    ex.validate()?;
    let fact = shared_fact(ex, rule.kind).ok_or(Error::NoEditableFact)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rule.seed);
    let replacement = match rule.kind {
        EditKind::Numeric => {
            let value: u128 = fact
                .parse()
                .map_err(|_| Error::Internal("digit run failed to parse".into()))?;
            let magnitude = rng.gen_range(1u128..=9);
            let negative = rng.gen_bool(0.5);
            // keep the perturbed value a plain digit run
            let perturbed = if negative && value >= magnitude {
                value - magnitude
            } else {
                value.saturating_add(magnitude)
            };
            perturbed.to_string()
        }
        EditKind::Chronological => {
            let by = rng.gen_range(1usize..=11);
            shift_month(&fact, by)
                .ok_or_else(|| Error::Internal("month disappeared".into()))?
                .to_string()
        }
    };
    let grounding_edited = replace_fact(&ex.grounding, &fact, &replacement);
    let target_edited = replace_fact(&ex.target, &fact, &replacement);
    Ok((
        AblationExample {
            grounding: ex.grounding.clone(),
            grounding_ablated: grounding_edited.clone(),
            context: ex.context.clone(),
            target: ex.target.clone(),
        },
        AblationExample {
            grounding: grounding_edited,
            grounding_ablated: ex.grounding.clone(),
            context: ex.context.clone(),
            target: target_edited,
        },
    ))
}

/// Number of sentences under the mechanical rule: a sentence ends at
/// `.`, `!` or `?` followed by whitespace (or end of text).
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = 0;
    let mut has_content = false;
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_whitespace() {
            has_content = true;
        }
        let terminator = matches!(c, '.' | '!' | '?');
        let at_break = terminator && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if at_break && has_content {
            sentences += 1;
            has_content = false;
        }
    }
    if has_content {
        sentences += 1;
    }
    sentences
}

fn junk_fraction(text: &str) -> f64 {
    let total = text.chars().count();
    if total == 0 {
        return 0.0;
    }
    let junk = text
        .chars()
        .filter(|c| !c.is_alphanumeric() && !c.is_ascii_punctuation() && !c.is_whitespace())
        .count();
    junk as f64 / total as f64
}

/// Accept or reject one example against the quality criteria. Checks run
/// in a fixed order; the first failure wins.
pub fn quality_filter(
    ex: &AblationExample,
    cfg: &QualityConfig,
) -> std::result::Result<(), RejectReason> {
    let target_chars = ex.target.chars().count();
    if target_chars < cfg.min_target_chars || target_chars > cfg.max_target_chars {
        return Err(RejectReason::TargetLength);
    }
    if count_sentences(&ex.context) > cfg.max_context_sentences {
        return Err(RejectReason::ContextSentences);
    }
    if ex.grounding.trim().is_empty() || ex.grounding_ablated.trim().is_empty() {
        return Err(RejectReason::EmptyGrounding);
    }
    for grounding in [&ex.grounding, &ex.grounding_ablated] {
        if junk_fraction(grounding) >= cfg.max_junk_fraction {
            return Err(RejectReason::Formatting);
        }
        if grounding.lines().any(|l| l.chars().count() > cfg.max_line_chars) {
            return Err(RejectReason::Formatting);
        }
    }
    Ok(())
}

fn host_of(url: &str) -> Option<String> {
    url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(|h| h.to_lowercase()))
}

fn record_reject(record: &RevisionPairRecord, cfg: &QualityConfig) -> Option<RejectReason> {
    if record.old_target == record.new_target
        || record.old_grounding == record.new_grounding
        || record.old_target.trim().is_empty()
        || record.new_target.trim().is_empty()
    {
        return Some(RejectReason::InvalidRecord);
    }
    if !cfg.allowed_hosts.is_empty() {
        let allowed: HashSet<String> = cfg.allowed_hosts.iter().map(|h| h.to_lowercase()).collect();
        for url in &record.source_urls {
            match host_of(url) {
                Some(host) if allowed.contains(&host) => {}
                _ => return Some(RejectReason::UntrustedHost),
            }
        }
    }
    None
}

/// Turn revision-pair records into evaluation examples: each record yields
/// the mirrored pair `(g, g', c, y)` and `(g', g, c, y')`, then the quality
/// filters drop failures with a counted reason. Output order follows input
/// order. Targets are assumed entailed by their own grounding; no
/// entailment check is performed.
pub fn extract_natural(records: &[RevisionPairRecord], cfg: &QualityConfig) -> ExtractionOutcome {
    let mut outcome = ExtractionOutcome {
        examples: Vec::new(),
        rejected: BTreeMap::new(),
    };
    let reject = |reason: RejectReason, rejected: &mut BTreeMap<String, usize>| {
        *rejected.entry(reason.as_str().to_string()).or_insert(0) += 1;
    };
    for record in records {
        if let Some(reason) = record_reject(record, cfg) {
            // both candidate examples are lost
            reject(reason, &mut outcome.rejected);
            reject(reason, &mut outcome.rejected);
            continue;
        }
        let candidates = [
            AblationExample {
                grounding: record.old_grounding.clone(),
                grounding_ablated: record.new_grounding.clone(),
                context: record.context.clone(),
                target: record.old_target.clone(),
            },
            AblationExample {
                grounding: record.new_grounding.clone(),
                grounding_ablated: record.old_grounding.clone(),
                context: record.context.clone(),
                target: record.new_target.clone(),
            },
        ];
        for ex in candidates {
            match quality_filter(&ex, cfg) {
                Ok(()) => outcome.examples.push(ex),
                Err(reason) => reject(reason, &mut outcome.rejected),
            }
        }
    }
    outcome
}

const DESK_ENTITIES: [&str; 10] = [
    "bridge",
    "tunnel",
    "pipeline",
    "reservoir",
    "stadium",
    "causeway",
    "viaduct",
    "terminal",
    "monument",
    "aqueduct",
];

const DESK_VERB_UNIT: [(&str, &str); 5] = [
    ("spans", "meters"),
    ("carries", "passengers"),
    ("stores", "liters"),
    ("cost", "dollars"),
    ("holds", "visitors"),
];

// Trailing filler spreads per-example losses across a continuum; a corpus
// of identical templates would score in lockstep and make loss quantiles
// degenerate.
const DESK_FILLER: [&str; 20] = [
    "beside", "along", "under", "beyond", "across", "behind", "during", "within", "throughout",
    "despite", "around", "toward", "against", "between", "amid", "atop", "past", "per", "until",
    "via",
];

/// Templated desk-scale corpus: each example states one numeric fact that
/// appears in both grounding and target, and the paired evaluation example
/// replaces that number in the ablated grounding. Deterministic under the
/// seed.
pub fn make_desk_corpus(n: usize, seed: u64) -> Result<(Vec<Example>, Vec<AblationExample>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("corpus size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // unique fact numbers, shuffled for texture
    let mut numbers: Vec<u64> = (100..100 + n as u64).collect();
    for i in (1..numbers.len()).rev() {
        numbers.swap(i, rng.gen_range(0..=i));
    }
    let mut training = Vec::with_capacity(n);
    let mut ablation = Vec::with_capacity(n);
    for (i, &number) in numbers.iter().enumerate() {
        let entity = DESK_ENTITIES[i % DESK_ENTITIES.len()];
        let (verb, unit) = DESK_VERB_UNIT[(i / DESK_ENTITIES.len()) % DESK_VERB_UNIT.len()];
        let delta = rng.gen_range(1u64..=9);
        let perturbed = number + delta;
        let tail: Vec<&str> = (0..rng.gen_range(0..=6))
            .map(|_| DESK_FILLER[rng.gen_range(0..DESK_FILLER.len())])
            .collect();
        let tail = if tail.is_empty() {
            String::new()
        } else {
            format!(" {}", tail.join(" "))
        };
        let grounding = format!("officials confirmed the {entity} {verb} {number} {unit} .");
        let grounding_ablated =
            format!("officials confirmed the {entity} {verb} {perturbed} {unit} .");
        let context = format!("the report describes the {entity} .");
        let target = format!("the {entity} {verb} {number} {unit}{tail} .");
        training.push(Example::new(&grounding, &context, &target));
        ablation.push(AblationExample {
            grounding,
            grounding_ablated,
            context,
            target,
        });
    }
    Ok((training, ablation))
}
