//! Loss-truncation training: drop the highest-loss fraction of a training
//! stream, ranked against a dynamic window of recent losses, then refit on
//! the kept examples. The grounded variant additionally drops examples
//! whose targets gain the least from grounding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{GroundedLM, LmParams};
use crate::vocab::{tokenize_frozen, Example};

/// Below this many window entries every example is kept: quantiles of tiny
/// windows are noise.
pub const WARMUP_MIN_WINDOW: usize = 100;

/// Ring buffer of recent per-example losses.
#[derive(Debug, Clone)]
pub struct LossWindow {
    capacity: usize,
    values: VecDeque<f64>,
}

impl LossWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "window capacity must be >= 1".into(),
            ));
        }
        Ok(LossWindow {
            capacity,
            values: VecDeque::new(),
        })
    }

    pub fn push(&mut self, value: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nearest-rank `keep_c`-quantile: the `ceil(keep_c * len)`-th smallest
    /// stored value.
    pub fn threshold(&self, keep_c: f64) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        if !(keep_c > 0.0 && keep_c <= 1.0) {
            return Err(Error::InvalidArgument("keep_c must be in (0, 1]".into()));
        }
        let mut sorted: Vec<f64> = self.values.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        // tiny slack so exact-integer products do not ceil one rank up
        let rank = (keep_c * sorted.len() as f64 - 1e-9).ceil() as usize;
        let rank = rank.clamp(1, sorted.len());
        Ok(sorted[rank - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    Basic,
    Grounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Fraction of examples to keep by loss rank.
    pub keep_c: f64,
    /// Fraction to keep by grounding-gap rank (grounded mode only).
    pub keep_c_gnd: f64,
    pub window_capacity: usize,
    /// Recorded for the run config; the counting fit has no epoch dynamics,
    /// so extra passes would only rescale counts.
    pub hotstart_passes: usize,
    pub mode: TruncationMode,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            keep_c: 0.8,
            keep_c_gnd: 0.8,
            window_capacity: 10_000,
            hotstart_passes: 1,
            mode: TruncationMode::Basic,
        }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("keep_c", self.keep_c), ("keep_c_gnd", self.keep_c_gnd)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in (0, 1]")));
            }
        }
        if self.window_capacity == 0 {
            return Err(Error::InvalidArgument(
                "window capacity must be >= 1".into(),
            ));
        }
        if self.hotstart_passes == 0 {
            return Err(Error::InvalidArgument(
                "hotstart_passes must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Mean per-token negative log-likelihood (nats/token) of the target given
/// grounding and context, including the `<eos>` step.
pub fn example_loss(model: &GroundedLM, ex: &Example) -> Result<f64> {
    ex.validate()?;
    let vocab = model.vocab();
    let grounding = tokenize_frozen(&ex.grounding, vocab);
    let context = tokenize_frozen(&ex.context, vocab);
    let target = tokenize_frozen(&ex.target, vocab);
    let lp = model.sequence_logprob(&grounding, &context, &target, true)?;
    Ok(-lp / (target.len() + 1) as f64)
}

/// How much grounding improves the target's total log-probability:
/// `log P(y|c,g) - log P(y|c)`, both including the `<eos>` step.
pub fn grounding_gap(grounded: &GroundedLM, ungrounded: &GroundedLM, ex: &Example) -> Result<f64> {
    if grounded.vocab().len() != ungrounded.vocab().len() {
        return Err(Error::VocabMismatch {
            expected: grounded.vocab().len(),
            got: ungrounded.vocab().len(),
        });
    }
    let vocab = grounded.vocab();
    let grounding = tokenize_frozen(&ex.grounding, vocab);
    let context = tokenize_frozen(&ex.context, vocab);
    let target = tokenize_frozen(&ex.target, vocab);
    let lp_g = grounded.sequence_logprob(&grounding, &context, &target, true)?;
    let lp_u = ungrounded.sequence_logprob(&grounding, &context, &target, true)?;
    Ok(lp_g - lp_u)
}

/// Per-example audit record from the truncation stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeepDecision {
    pub index: usize,
    pub loss: f64,
    pub loss_threshold: Option<f64>,
    pub gap: Option<f64>,
    pub gap_threshold: Option<f64>,
    pub kept: bool,
}

#[derive(Debug)]
pub struct TruncationOutcome {
    pub model: GroundedLM,
    pub decisions: Vec<KeepDecision>,
    pub kept: usize,
    pub dropped: usize,
}

/// Two-phase loss-truncated training. Phase 1 fits a hotstart model on the
/// full corpus. Phase 2 streams the corpus in order, scoring each example
/// under the frozen hotstart model and keeping it iff its loss is at or
/// below the running `keep_c` window quantile; grounded mode additionally
/// requires the grounding gap to reach the `(1 - keep_c_gnd)` quantile of
/// a second window. The final model is refit on the kept examples.
pub fn train_loss_truncated(
    corpus: &[Example],
    config: &TruncationConfig,
    params: &LmParams,
) -> Result<TruncationOutcome> {
    config.validate()?;
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }

    let hotstart = GroundedLM::fit(corpus, params)?;
    let hotstart_ungrounded = match config.mode {
        TruncationMode::Grounded => Some(hotstart.ungrounded_view()),
        TruncationMode::Basic => None,
    };

    let mut loss_window = LossWindow::new(config.window_capacity)?;
    let mut gap_window = LossWindow::new(config.window_capacity)?;
    let mut decisions = Vec::with_capacity(corpus.len());
    let mut kept_examples = Vec::new();

    for (index, ex) in corpus.iter().enumerate() {
        let loss = example_loss(&hotstart, ex)?;
        loss_window.push(loss);
        let (loss_ok, loss_threshold) = if loss_window.len() < WARMUP_MIN_WINDOW {
            (true, None)
        } else {
            let t = loss_window.threshold(config.keep_c)?;
            (loss <= t, Some(t))
        };

        let (gap, gap_ok, gap_threshold) = match &hotstart_ungrounded {
            Some(ungrounded) => {
                let gap = grounding_gap(&hotstart, ungrounded, ex)?;
                gap_window.push(gap);
                if gap_window.len() < WARMUP_MIN_WINDOW {
                    (Some(gap), true, None)
                } else {
                    let t = gap_window.threshold(1.0 - config.keep_c_gnd)?;
                    (Some(gap), gap >= t, Some(t))
                }
            }
            None => (None, true, None),
        };

        let kept = loss_ok && gap_ok;
        if kept {
            kept_examples.push(ex.clone());
        }
        decisions.push(KeepDecision {
            index,
            loss,
            loss_threshold,
            gap,
            gap_threshold,
            kept,
        });
    }

    if kept_examples.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let kept = kept_examples.len();
    let model = GroundedLM::fit(&kept_examples, params)?;
    Ok(TruncationOutcome {
        model,
        decisions,
        kept,
        dropped: corpus.len() - kept,
    })
}
