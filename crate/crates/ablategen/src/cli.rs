//! Command-line surface. Every subcommand resolves its parameters from
//! (in priority order) the command line, the optional `--config` JSON
//! file, and built-in defaults, then echoes the resolved configuration
//! into its outputs. Runs with identical arguments, seed and input files
//! produce byte-identical primary outputs.
//!
//! Exit codes: 0 success, 2 validation error, 3 data error, 4 internal
//! invariant breach.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ablation::{self, AblationExample, AblationReport};
use crate::datagen::{self, EditKind, EditRule, QualityConfig, RevisionPairRecord};
use crate::decode::{self, DecodingPolicy, PolicyKind, SamplerConfig, StopRule};
use crate::error::{Error, Result};
use crate::jsonl::{self, JsonlMeta};
use crate::lm::{CacheMode, GroundedLM, LmParams};
use crate::metrics::{self, EvalPair};
use crate::truncate::{self, TruncationConfig, TruncationMode};
use crate::vocab::{tokenize_build, Example, Vocab};

pub const REPORT_FORMAT_VERSION: &str = "ablategen.report.v1";

/// Default cap on synthetic examples per invocation; deliberate fact
/// edits are meant for evaluation sets, not bulk generation.
pub const SYNTH_DEFAULT_CAP: usize = 10_000;

#[derive(Parser, Debug)]
#[command(
    name = "ablategen",
    version,
    about = "Grounded generation toolkit: train cache n-gram models, decode with support-score policies, and evaluate factual ablation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON object of default parameter values for the invoked subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Wider margin grids and progress notes on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on example JSON Lines, optionally with loss truncation.
    Train(TrainArgs),
    /// Sample continuations for each input example.
    Generate(GenerateArgs),
    /// Score an ablation dataset: accuracy and margin-accuracy.
    EvalAblation(EvalAblationArgs),
    /// Corpus BLEU and NIST over candidate/reference pairs.
    EvalLexical(EvalLexicalArgs),
    /// Build synthetic ablation data: fact edits or the templated desk corpus.
    Synth(SynthArgs),
    /// Extract ablation examples from revision-pair records.
    Extract(ExtractArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TrainModeArg {
    Plain,
    Lt,
    LtGnd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CacheModeArg {
    Grounding,
    None,
}

impl From<CacheModeArg> for CacheMode {
    fn from(v: CacheModeArg) -> Self {
        match v {
            CacheModeArg::Grounding => CacheMode::GroundingCache,
            CacheModeArg::None => CacheMode::None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyArg {
    Base,
    PmiInterp,
    PmiAdd,
}

impl From<PolicyArg> for PolicyKind {
    fn from(v: PolicyArg) -> Self {
        match v {
            PolicyArg::Base => PolicyKind::Base,
            PolicyArg::PmiInterp => PolicyKind::PmiInterp,
            PolicyArg::PmiAdd => PolicyKind::PmiAdd,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StopArg {
    Sentence,
    EosOnly,
}

impl From<StopArg> for StopRule {
    fn from(v: StopArg) -> Self {
        match v {
            StopArg::Sentence => StopRule::Sentence,
            StopArg::EosOnly => StopRule::EosOnly,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RuleArg {
    Numeric,
    Chronological,
}

impl From<RuleArg> for EditKind {
    fn from(v: RuleArg) -> Self {
        match v {
            RuleArg::Numeric => EditKind::Numeric,
            RuleArg::Chronological => EditKind::Chronological,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training examples: JSON Lines of {"grounding","context","target"}.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the serialized model.
    #[arg(long)]
    model_out: PathBuf,
    /// plain fit, loss truncation, or grounded loss truncation.
    #[arg(long, value_enum)]
    mode: Option<TrainModeArg>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    cache_mode: Option<CacheModeArg>,
    #[arg(long)]
    keep_c: Option<f64>,
    #[arg(long)]
    keep_c_gnd: Option<f64>,
    /// Capacity of the dynamic loss window.
    #[arg(long)]
    window: Option<usize>,
    /// Training report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Grounded model file.
    #[arg(long)]
    model: PathBuf,
    /// Ungrounded model file; required for the support-score policies.
    #[arg(long)]
    ungrounded_model: Option<PathBuf>,
    /// Inputs: JSON Lines with "grounding" and "context" fields.
    #[arg(long)]
    input: PathBuf,
    /// Output generations (JSON Lines).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long, value_enum)]
    stop: Option<StopArg>,
}

#[derive(Args, Debug)]
struct EvalAblationArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    ungrounded_model: Option<PathBuf>,
    /// JSON Lines of {"grounding","grounding_ablated","context","target"}.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated margins: nats ("0.69"), "ln:0.69", or "log10:2".
    #[arg(long)]
    margins: Option<String>,
    /// Keep the per-example score pairs in the report.
    #[arg(long)]
    include_pairs: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalLexicalArgs {
    /// JSON Lines of {"candidate","reference"} text pairs.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bleu_n: Option<usize>,
    #[arg(long)]
    nist_n: Option<usize>,
    /// Replace zero precisions with 1e-9 instead of zeroing BLEU.
    #[arg(long)]
    smooth_bleu: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Edit mode: input examples to perturb (mutually exclusive with --desk).
    #[arg(long, conflicts_with = "desk")]
    input: Option<PathBuf>,
    /// Fact kind to edit in --input mode.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Desk mode: generate a templated corpus of this many examples.
    #[arg(long)]
    desk: Option<usize>,
    /// Ablation examples output (JSON Lines).
    #[arg(long)]
    output: PathBuf,
    /// Training examples output for --desk mode.
    #[arg(long)]
    train_out: Option<PathBuf>,
    /// Cap on emitted synthetic examples.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Revision-pair records (JSON Lines).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    min_target_chars: Option<usize>,
    #[arg(long)]
    max_target_chars: Option<usize>,
    #[arg(long)]
    max_context_sentences: Option<usize>,
    /// Allowed source host; repeat to extend. Empty means accept all.
    #[arg(long = "allow-host")]
    allow_hosts: Vec<String>,
    /// Disable all quality filters.
    #[arg(long)]
    permissive: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Optional JSON object of per-flag defaults.
struct ConfigFile(serde_json::Map<String, serde_json::Value>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile(serde_json::Map::new()));
        };
        let raw = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
        match value {
            serde_json::Value::Object(map) => Ok(ConfigFile(map)),
            _ => Err(Error::InvalidArgument(
                "config file must hold a JSON object".into(),
            )),
        }
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Error::InvalidArgument(format!("config key {key:?}: {e}"))),
        }
    }
}

fn resolve<T: DeserializeOwned>(
    cli: Option<T>,
    file: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = cli {
        return Ok(v);
    }
    Ok(file.get(key)?.unwrap_or(default))
}

fn write_report<T: Serialize>(report: &T, path: Option<&Path>) -> Result<()> {
    let body = serde_json::to_string_pretty(report)?;
    match path {
        Some(path) => fs::write(path, body)?,
        None => println!("{body}"),
    }
    Ok(())
}

fn note(verbose: bool, message: &str) {
    if !verbose {
        return;
    }
    if std::env::var_os("ABLATEGEN_NO_COLOR").is_some() {
        eprintln!("{message}");
    } else {
        eprintln!("\x1b[2m{message}\x1b[0m");
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::VocabMismatch { .. } => 2,
        Error::Internal(_) => 4,
        // per-example failures come from data files
        _ => 3,
    }
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let seed = resolve(cli.seed, &file, "seed", 0u64)?;
    match cli.command {
        Command::Train(args) => cmd_train(args, &file, seed, cli.verbose),
        Command::Generate(args) => cmd_generate(args, &file, seed, cli.verbose),
        Command::EvalAblation(args) => cmd_eval_ablation(args, &file, seed, cli.verbose),
        Command::EvalLexical(args) => cmd_eval_lexical(args, &file, seed),
        Command::Synth(args) => cmd_synth(args, &file, seed, cli.verbose),
        Command::Extract(args) => cmd_extract(args, &file, seed),
    }
}

#[derive(Debug, Serialize)]
struct TrainResolved {
    input: String,
    model_out: String,
    mode: TrainModeArg,
    order: usize,
    k: f64,
    lambda: f64,
    cache_mode: CacheMode,
    keep_c: f64,
    keep_c_gnd: f64,
    window: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct ThresholdSample {
    index: usize,
    loss_threshold: Option<f64>,
    gap_threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TrainReport {
    format_version: &'static str,
    config: TrainResolved,
    n_examples: usize,
    kept: usize,
    dropped: usize,
    kept_fraction: f64,
    threshold_trace: Vec<ThresholdSample>,
}

fn cmd_train(args: TrainArgs, file: &ConfigFile, seed: u64, verbose: bool) -> Result<()> {
    let resolved = TrainResolved {
        input: args.input.display().to_string(),
        model_out: args.model_out.display().to_string(),
        mode: resolve(args.mode, file, "mode", TrainModeArg::Plain)?,
        order: resolve(args.order, file, "order", LmParams::default().order)?,
        k: resolve(args.k, file, "k", LmParams::default().k)?,
        lambda: resolve(args.lambda, file, "lambda", LmParams::default().lambda)?,
        cache_mode: resolve(args.cache_mode, file, "cache_mode", CacheModeArg::Grounding)?.into(),
        keep_c: resolve(args.keep_c, file, "keep_c", 0.8)?,
        keep_c_gnd: resolve(args.keep_c_gnd, file, "keep_c_gnd", 0.8)?,
        window: resolve(args.window, file, "window", 10_000)?,
        seed,
    };
    let params = LmParams {
        order: resolved.order,
        k: resolved.k,
        lambda: resolved.lambda,
        cache_mode: resolved.cache_mode,
    };
    params.validate()?;

    let corpus: Vec<Example> = jsonl::read_jsonl(&args.input)?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training file"));
    }
    note(verbose, &format!("loaded {} training examples", corpus.len()));

    let (model, kept, dropped, trace) = match resolved.mode {
        TrainModeArg::Plain => {
            let model = GroundedLM::fit(&corpus, &params)?;
            (model, corpus.len(), 0, Vec::new())
        }
        TrainModeArg::Lt | TrainModeArg::LtGnd => {
            let config = TruncationConfig {
                keep_c: resolved.keep_c,
                keep_c_gnd: resolved.keep_c_gnd,
                window_capacity: resolved.window,
                hotstart_passes: 1,
                mode: if resolved.mode == TrainModeArg::LtGnd {
                    TruncationMode::Grounded
                } else {
                    TruncationMode::Basic
                },
            };
            let outcome = truncate::train_loss_truncated(&corpus, &config, &params)?;
            let step = (outcome.decisions.len() / 20).max(1);
            let trace = outcome
                .decisions
                .iter()
                .step_by(step)
                .map(|d| ThresholdSample {
                    index: d.index,
                    loss_threshold: d.loss_threshold,
                    gap_threshold: d.gap_threshold,
                })
                .collect();
            (outcome.model, outcome.kept, outcome.dropped, trace)
        }
    };

    model.save(&args.model_out)?;
    let n_examples = corpus.len();
    let report = TrainReport {
        format_version: REPORT_FORMAT_VERSION,
        config: resolved,
        n_examples,
        kept,
        dropped,
        kept_fraction: kept as f64 / n_examples as f64,
        threshold_trace: trace,
    };
    write_report(&report, args.report.as_deref())
}

#[derive(Debug, Deserialize)]
struct GenInput {
    grounding: String,
    #[serde(default)]
    context: String,
}

#[derive(Debug, Serialize)]
struct GenerateResolved {
    model: String,
    ungrounded_model: Option<String>,
    input: String,
    output: String,
    policy: DecodingPolicy,
    top_p: f64,
    max_tokens: usize,
    stop: StopRule,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct GenRecord {
    context: String,
    grounding: String,
    generation: String,
    policy: DecodingPolicy,
    seed: u64,
}

fn resolve_policy(
    policy: Option<PolicyArg>,
    alpha: Option<f64>,
    file: &ConfigFile,
) -> Result<DecodingPolicy> {
    let kind: PolicyKind = resolve(policy, file, "policy", PolicyArg::Base)?.into();
    let alpha = resolve(alpha, file, "alpha", 0.0)?;
    DecodingPolicy::with_alpha(kind, alpha)
}

/// Load the grounded/ungrounded pair. Support-score policies require the
/// ungrounded model explicitly; the base policy never consults it, so the
/// grounded model's cache-disabled view stands in.
fn load_model_pair(
    model: &Path,
    ungrounded: Option<&Path>,
    policy: &DecodingPolicy,
) -> Result<(GroundedLM, GroundedLM)> {
    let grounded = GroundedLM::load(model)?;
    let ungrounded = match ungrounded {
        Some(path) => GroundedLM::load(path)?,
        None => {
            if policy.kind != PolicyKind::Base {
                return Err(Error::InvalidArgument(
                    "--ungrounded-model is required for support-score policies".into(),
                ));
            }
            grounded.ungrounded_view()
        }
    };
    if grounded.vocab().len() != ungrounded.vocab().len() {
        return Err(Error::VocabMismatch {
            expected: grounded.vocab().len(),
            got: ungrounded.vocab().len(),
        });
    }
    Ok((grounded, ungrounded))
}

fn cmd_generate(args: GenerateArgs, file: &ConfigFile, seed: u64, verbose: bool) -> Result<()> {
    let policy = resolve_policy(args.policy, args.alpha, file)?;
    let resolved = GenerateResolved {
        model: args.model.display().to_string(),
        ungrounded_model: args
            .ungrounded_model
            .as_ref()
            .map(|p| p.display().to_string()),
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        policy,
        top_p: resolve(args.top_p, file, "top_p", 0.5)?,
        max_tokens: resolve(args.max_tokens, file, "max_tokens", 64)?,
        stop: resolve(args.stop, file, "stop", StopArg::Sentence)?.into(),
        seed,
    };
    let (grounded, ungrounded) =
        load_model_pair(&args.model, args.ungrounded_model.as_deref(), &policy)?;
    let inputs: Vec<GenInput> = jsonl::read_jsonl(&args.input)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput("generation input file"));
    }

    let vocab = grounded.vocab();
    let mut records = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let example_seed = seed.wrapping_add(i as u64);
        let sampler = SamplerConfig {
            top_p: resolved.top_p,
            max_tokens: resolved.max_tokens,
            seed: example_seed,
            stop: resolved.stop,
        };
        let grounding = crate::vocab::tokenize_frozen(&input.grounding, vocab);
        let context = crate::vocab::tokenize_frozen(&input.context, vocab);
        let generation = decode::generate(
            &grounded,
            &ungrounded,
            &policy,
            &sampler,
            &grounding,
            &context,
        )
        .map_err(|e| Error::AtExample {
            index: i,
            source: Box::new(e),
        })?;
        records.push(GenRecord {
            context: input.context.clone(),
            grounding: input.grounding.clone(),
            generation: generation.to_text(vocab),
            policy,
            seed: example_seed,
        });
    }
    note(verbose, &format!("generated {} continuations", records.len()));
    let meta = JsonlMeta::new(&resolved)?;
    jsonl::write_jsonl(&args.output, Some(&meta), &records)
}

#[derive(Debug, Serialize)]
struct EvalAblationResolved {
    model: String,
    ungrounded_model: Option<String>,
    dataset: String,
    policy: DecodingPolicy,
    margins_nats: Vec<f64>,
    include_pairs: bool,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct EvalAblationOut {
    format_version: &'static str,
    config: EvalAblationResolved,
    #[serde(flatten)]
    report: AblationReport,
}

fn parse_margin_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(ablation::parse_margin)
        .collect()
}

fn cmd_eval_ablation(
    args: EvalAblationArgs,
    file: &ConfigFile,
    seed: u64,
    verbose: bool,
) -> Result<()> {
    let policy = resolve_policy(args.policy, args.alpha, file)?;
    let margins_raw: Option<String> = match args.margins {
        Some(m) => Some(m),
        None => file.get("margins")?,
    };
    let mut margins = match margins_raw {
        Some(raw) => parse_margin_list(&raw)?,
        None => ablation::default_margins(),
    };
    if verbose {
        for m in ablation::verbose_margins() {
            if !margins.contains(&m) {
                margins.push(m);
            }
        }
    }
    let resolved = EvalAblationResolved {
        model: args.model.display().to_string(),
        ungrounded_model: args
            .ungrounded_model
            .as_ref()
            .map(|p| p.display().to_string()),
        dataset: args.dataset.display().to_string(),
        policy,
        margins_nats: {
            let mut sorted = margins.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted
        },
        include_pairs: args.include_pairs,
        seed,
    };
    let (grounded, ungrounded) =
        load_model_pair(&args.model, args.ungrounded_model.as_deref(), &policy)?;
    let dataset: Vec<AblationExample> = jsonl::read_jsonl(&args.dataset)?;
    for (index, ex) in dataset.iter().enumerate() {
        ex.validate().map_err(|e| Error::AtExample {
            index,
            source: Box::new(e),
        })?;
    }
    note(verbose, &format!("scoring {} examples", dataset.len()));
    let mut report = ablation::evaluate(&grounded, &ungrounded, &policy, &dataset, &margins)?;
    if !args.include_pairs {
        report.pairs.clear();
    }
    let out = EvalAblationOut {
        format_version: REPORT_FORMAT_VERSION,
        config: resolved,
        report,
    };
    write_report(&out, args.report.as_deref())
}

#[derive(Debug, Deserialize)]
struct LexicalInput {
    candidate: String,
    reference: String,
}

#[derive(Debug, Serialize)]
struct EvalLexicalResolved {
    input: String,
    bleu_n: usize,
    nist_n: usize,
    smooth_bleu: bool,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct EvalLexicalOut {
    format_version: &'static str,
    config: EvalLexicalResolved,
    n: usize,
    bleu: f64,
    nist: f64,
}

fn cmd_eval_lexical(args: EvalLexicalArgs, file: &ConfigFile, seed: u64) -> Result<()> {
    let resolved = EvalLexicalResolved {
        input: args.input.display().to_string(),
        bleu_n: resolve(args.bleu_n, file, "bleu_n", 4)?,
        nist_n: resolve(args.nist_n, file, "nist_n", 5)?,
        smooth_bleu: args.smooth_bleu || file.get("smooth_bleu")?.unwrap_or(false),
        seed,
    };
    let inputs: Vec<LexicalInput> = jsonl::read_jsonl(&args.input)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput("lexical evaluation file"));
    }
    let mut vocab = Vocab::new();
    let mut pairs = Vec::with_capacity(inputs.len());
    for (index, input) in inputs.iter().enumerate() {
        let pair = EvalPair {
            candidate: tokenize_build(&input.candidate, &mut vocab),
            reference: tokenize_build(&input.reference, &mut vocab),
        };
        if pair.reference.is_empty() {
            return Err(Error::AtExample {
                index,
                source: Box::new(Error::InvalidArgument("empty reference".into())),
            });
        }
        pairs.push(pair);
    }
    let out = EvalLexicalOut {
        format_version: REPORT_FORMAT_VERSION,
        n: pairs.len(),
        bleu: metrics::bleu(&pairs, resolved.bleu_n, resolved.smooth_bleu)?,
        nist: metrics::nist(&pairs, resolved.nist_n)?,
        config: resolved,
    };
    write_report(&out, args.report.as_deref())
}

#[derive(Debug, Serialize)]
struct SynthResolved {
    input: Option<String>,
    rule: Option<EditKind>,
    desk: Option<usize>,
    output: String,
    train_out: Option<String>,
    cap: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct SynthReport {
    format_version: &'static str,
    config: SynthResolved,
    n_inputs: usize,
    n_emitted: usize,
    skipped_no_editable_fact: usize,
    /// Obscurity and commonsense vetting of edited facts is left to a
    /// human review pass.
    needs_human_review: bool,
}

fn cmd_synth(args: SynthArgs, file: &ConfigFile, seed: u64, verbose: bool) -> Result<()> {
    let desk = match args.desk {
        Some(n) => Some(n),
        None => file.get("desk")?,
    };
    let rule_kind: Option<RuleArg> = match args.rule {
        Some(r) => Some(r),
        None => file.get("rule")?,
    };
    let cap = resolve(args.cap, file, "cap", SYNTH_DEFAULT_CAP)?;
    let resolved = SynthResolved {
        input: args.input.as_ref().map(|p| p.display().to_string()),
        rule: rule_kind.map(EditKind::from),
        desk,
        output: args.output.display().to_string(),
        train_out: args.train_out.as_ref().map(|p| p.display().to_string()),
        cap,
        seed,
    };

    match (desk, &args.input) {
        (Some(n), None) => {
            if n > cap {
                return Err(Error::InvalidArgument(format!(
                    "desk corpus of {n} exceeds the cap of {cap}; raise --cap deliberately"
                )));
            }
            let (train, ablation) = datagen::make_desk_corpus(n, seed)?;
            let meta = JsonlMeta::new(&resolved)?;
            if let Some(train_out) = &args.train_out {
                jsonl::write_jsonl(train_out, Some(&meta), &train)?;
            }
            jsonl::write_jsonl(&args.output, Some(&meta), &ablation)?;
            note(verbose, &format!("desk corpus: {n} examples"));
            let report = SynthReport {
                format_version: REPORT_FORMAT_VERSION,
                config: resolved,
                n_inputs: 0,
                n_emitted: n,
                skipped_no_editable_fact: 0,
                needs_human_review: false,
            };
            write_report(&report, args.report.as_deref())
        }
        (None, Some(input)) => {
            let kind: EditKind = rule_kind
                .ok_or_else(|| Error::InvalidArgument("--rule is required with --input".into()))?
                .into();
            let examples: Vec<Example> = jsonl::read_jsonl(input)?;
            if examples.len().saturating_mul(2) > cap {
                return Err(Error::InvalidArgument(format!(
                    "{} inputs would emit {} synthetic examples, over the cap of {cap}; \
                     raise --cap deliberately",
                    examples.len(),
                    examples.len() * 2
                )));
            }
            let mut emitted = Vec::new();
            let mut skipped = 0usize;
            for (i, ex) in examples.iter().enumerate() {
                let rule = EditRule {
                    kind,
                    seed: seed.wrapping_add(i as u64),
                };
                match datagen::synth_ablate(ex, &rule) {
                    Ok((a, b)) => {
                        emitted.push(a);
                        emitted.push(b);
                    }
                    Err(Error::NoEditableFact) => skipped += 1,
                    Err(e) => {
                        return Err(Error::AtExample {
                            index: i,
                            source: Box::new(e),
                        })
                    }
                }
            }
            let meta = JsonlMeta::new(&resolved)?;
            jsonl::write_jsonl(&args.output, Some(&meta), &emitted)?;
            note(
                verbose,
                &format!("emitted {} examples, skipped {skipped}", emitted.len()),
            );
            let report = SynthReport {
                format_version: REPORT_FORMAT_VERSION,
                config: resolved,
                n_inputs: examples.len(),
                n_emitted: emitted.len(),
                skipped_no_editable_fact: skipped,
                needs_human_review: true,
            };
            write_report(&report, args.report.as_deref())
        }
        _ => Err(Error::InvalidArgument(
            "use exactly one of --desk N or --input FILE --rule KIND".into(),
        )),
    }
}

#[derive(Debug, Serialize)]
struct ExtractResolved {
    input: String,
    output: String,
    quality: QualityConfig,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct ExtractReport {
    format_version: &'static str,
    config: ExtractResolved,
    n_records: usize,
    n_emitted: usize,
    rejected: BTreeMap<String, usize>,
    /// Targets are assumed entailed by their own grounding; extraction
    /// performs no entailment check.
    entailment_checked: bool,
}

fn cmd_extract(args: ExtractArgs, file: &ConfigFile, seed: u64) -> Result<()> {
    let mut quality = if args.permissive {
        QualityConfig::permissive()
    } else {
        QualityConfig::default()
    };
    quality.min_target_chars = resolve(
        args.min_target_chars,
        file,
        "min_target_chars",
        quality.min_target_chars,
    )?;
    quality.max_target_chars = resolve(
        args.max_target_chars,
        file,
        "max_target_chars",
        quality.max_target_chars,
    )?;
    quality.max_context_sentences = resolve(
        args.max_context_sentences,
        file,
        "max_context_sentences",
        quality.max_context_sentences,
    )?;
    if !args.allow_hosts.is_empty() {
        quality.allowed_hosts = args.allow_hosts.clone();
    } else if let Some(hosts) = file.get::<Vec<String>>("allow_hosts")? {
        quality.allowed_hosts = hosts;
    }

    let resolved = ExtractResolved {
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        quality: quality.clone(),
        seed,
    };
    let records: Vec<RevisionPairRecord> = jsonl::read_jsonl(&args.input)?;
    let outcome = datagen::extract_natural(&records, &quality);
    let meta = JsonlMeta::new(&resolved)?;
    jsonl::write_jsonl(&args.output, Some(&meta), &outcome.examples)?;
    let report = ExtractReport {
        format_version: REPORT_FORMAT_VERSION,
        config: resolved,
        n_records: records.len(),
        n_emitted: outcome.examples.len(),
        rejected: outcome.rejected,
        entailment_checked: false,
    };
    write_report(&report, args.report.as_deref())
}
