//! End-to-end tests of the `ablategen` binary: the full desk pipeline,
//! argument validation and exit codes, and output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ablategen::ablation::AblationExample;
use ablategen::jsonl;
use ablategen::vocab::Example;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ablategen"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn ablategen");
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_code(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("spawn ablategen");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("report must be valid JSON")
}

struct DeskFiles {
    train: PathBuf,
    ablation: PathBuf,
    model: PathBuf,
    ungrounded: PathBuf,
}

fn desk_setup(dir: &Path, n: usize) -> DeskFiles {
    let files = DeskFiles {
        train: dir.join("train.jsonl"),
        ablation: dir.join("ablation.jsonl"),
        model: dir.join("model.json"),
        ungrounded: dir.join("ungrounded.json"),
    };
    run_ok(&[
        "synth",
        "--desk",
        &n.to_string(),
        "--train-out",
        files.train.to_str().unwrap(),
        "--output",
        files.ablation.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    run_ok(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        files.model.to_str().unwrap(),
    ]);
    run_ok(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        files.ungrounded.to_str().unwrap(),
        "--cache-mode",
        "none",
    ]);
    files
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run_code(&["--help"]).0, 0);
    assert_eq!(run_code(&["--version"]).0, 0);
    assert_eq!(run_code(&["train", "--help"]).0, 0);
}

#[test]
fn unknown_flag_exits_two() {
    assert_eq!(run_code(&["train", "--bogus"]).0, 2);
}

#[test]
fn missing_input_file_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_code(&[
        "train",
        "--input",
        dir.path().join("nope.jsonl").to_str().unwrap(),
        "--model-out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
}

#[test]
fn train_validates_keep_c() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 30);
    let (code, stderr) = run_code(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        dir.path().join("m2.json").to_str().unwrap(),
        "--mode",
        "lt",
        "--keep-c",
        "0",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("keep_c"));
}

#[test]
fn desk_pipeline_reaches_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 60);

    let out = run_ok(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--margins",
        "ln:0.6931,log10:2",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["n"], 60);
    assert_eq!(report["accuracy"], 1.0);
    let margins = report["margin_acc"].as_array().unwrap();
    assert_eq!(margins.len(), 2);
    assert!(margins[0]["value"].as_f64().unwrap() >= 0.95);
}

#[test]
fn eval_ablation_margin_zero_equals_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 20);
    let out = run_ok(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--margins",
        "ln:0",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["margin_acc"][0]["value"], report["accuracy"]);
}

#[test]
fn eval_ablation_margin_list_forms() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 10);
    let out = run_ok(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--margins",
        "log10:2,log10:3",
    ]);
    let report = stdout_json(&out);
    let margins = report["margin_acc"].as_array().unwrap();
    assert_eq!(margins.len(), 2);
    assert!((margins[0]["margin_nats"].as_f64().unwrap() - 100f64.ln()).abs() < 1e-12);
    assert!((margins[1]["margin_nats"].as_f64().unwrap() - 1000f64.ln()).abs() < 1e-12);

    let (code, stderr) = run_code(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--margins",
        "ln:-3",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn config_file_with_wrong_type_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 10);
    let config_path = dir.path().join("bad.json");
    std::fs::write(&config_path, r#"{"order": "three"}"#).unwrap();
    let (code, stderr) = run_code(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        dir.path().join("m.json").to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("order"));
}

#[test]
fn eval_ablation_supports_policies_and_requires_ungrounded_model() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 20);

    let (code, stderr) = run_code(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--policy",
        "pmi-add",
        "--alpha",
        "0.3",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("ungrounded"));

    let out = run_ok(&[
        "eval-ablation",
        "--model",
        files.model.to_str().unwrap(),
        "--ungrounded-model",
        files.ungrounded.to_str().unwrap(),
        "--dataset",
        files.ablation.to_str().unwrap(),
        "--policy",
        "pmi-add",
        "--alpha",
        "0.3",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["config"]["policy"]["kind"], "pmi_add");
}

#[test]
fn generate_is_deterministic_and_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 30);
    let out_path = dir.path().join("gen.jsonl");
    let args = [
        "generate",
        "--model",
        files.model.to_str().unwrap(),
        "--input",
        files.train.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "--policy",
        "base",
        "--top-p",
        "0.5",
        "--seed",
        "7",
    ];
    run_ok(&args);
    let first = std::fs::read(&out_path).unwrap();
    run_ok(&args);
    let second = std::fs::read(&out_path).unwrap();
    assert_eq!(first, second);

    let (meta, records) =
        jsonl::read_jsonl_with_meta::<serde_json::Value>(&out_path).unwrap();
    let meta = meta.expect("generations carry a meta line");
    assert_eq!(meta.config["top_p"], 0.5);
    assert_eq!(records.len(), 30);
    for record in &records {
        assert!(record.get("generation").is_some());
        assert_eq!(record["policy"]["kind"], "base");
    }
}

#[test]
fn generate_pmi_requires_ungrounded_model() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 10);
    let out_path = dir.path().join("gen.jsonl");
    let (code, stderr) = run_code(&[
        "generate",
        "--model",
        files.model.to_str().unwrap(),
        "--input",
        files.train.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "--policy",
        "pmi-add",
        "--alpha",
        "0.3",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");

    run_ok(&[
        "generate",
        "--model",
        files.model.to_str().unwrap(),
        "--ungrounded-model",
        files.ungrounded.to_str().unwrap(),
        "--input",
        files.train.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "--policy",
        "pmi-add",
        "--alpha",
        "0.3",
    ]);
}

#[test]
fn train_lt_reports_kept_fraction_near_keep_c() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 600);
    let report_path = dir.path().join("train_report.json");
    run_ok(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        dir.path().join("lt.json").to_str().unwrap(),
        "--mode",
        "lt",
        "--keep-c",
        "0.8",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let fraction = report["kept_fraction"].as_f64().unwrap();
    // overall fraction includes the always-kept warm-up prefix
    assert!(
        (0.75..=0.90).contains(&fraction),
        "kept fraction {fraction}"
    );
    assert!(!report["threshold_trace"].as_array().unwrap().is_empty());
    assert_eq!(report["config"]["mode"], "lt");
}

#[test]
fn model_reload_reproduces_scores() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 40);
    // identical inputs give byte-identical model files
    let second_model = dir.path().join("model_again.json");
    run_ok(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        second_model.to_str().unwrap(),
    ]);
    let a = std::fs::read(&files.model).unwrap();
    let b = std::fs::read(&second_model).unwrap();
    assert_eq!(a, b);
}

#[test]
fn eval_lexical_self_match_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.jsonl");
    let pairs: Vec<serde_json::Value> = (0..5)
        .map(|i| {
            serde_json::json!({
                "candidate": format!("the quick brown fox number {i} jumps over the lazy dog ."),
                "reference": format!("the quick brown fox number {i} jumps over the lazy dog ."),
            })
        })
        .collect();
    jsonl::write_jsonl(&input, None, &pairs).unwrap();
    let out = run_ok(&["eval-lexical", "--input", input.to_str().unwrap()]);
    let report = stdout_json(&out);
    assert_eq!(report["n"], 5);
    assert!((report["bleu"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(report["nist"].as_f64().unwrap() > 0.0);
}

#[test]
fn synth_edit_mode_emits_mirrored_examples() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("examples.jsonl");
    let examples = vec![
        Example::new(
            "crews repaired 7 turbines at the plant .",
            "the outage lasted a week .",
            "all 7 turbines were repaired .",
        ),
        Example::new("no numbers here .", "", "nothing editable ."),
    ];
    jsonl::write_jsonl(&input, None, &examples).unwrap();
    let output = dir.path().join("synthetic.jsonl");
    let out = run_ok(&[
        "synth",
        "--input",
        input.to_str().unwrap(),
        "--rule",
        "numeric",
        "--output",
        output.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["n_inputs"], 2);
    assert_eq!(report["n_emitted"], 2);
    assert_eq!(report["skipped_no_editable_fact"], 1);
    assert_eq!(report["needs_human_review"], true);

    let emitted: Vec<AblationExample> = jsonl::read_jsonl(&output).unwrap();
    assert_eq!(emitted.len(), 2);
    assert_eq!(emitted[0].grounding, emitted[1].grounding_ablated);
    assert_eq!(emitted[0].grounding_ablated, emitted[1].grounding);
}

#[test]
fn synth_cap_blocks_oversized_batches() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_code(&[
        "synth",
        "--desk",
        "20000",
        "--output",
        dir.path().join("too_big.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("cap"));

    // explicit override works
    run_ok(&[
        "synth",
        "--desk",
        "10001",
        "--cap",
        "20000",
        "--output",
        dir.path().join("big.jsonl").to_str().unwrap(),
    ]);
}

#[test]
fn extract_emits_filtered_examples_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.jsonl");
    let clean = serde_json::json!({
        "context": "the article covers the harbor . construction began early .",
        "old_target": "the harbor expansion added forty berths for cargo ships in its first phase .",
        "new_target": "the harbor expansion added fifty berths for cargo ships in its second phase .",
        "old_grounding": "port authority records describe forty berths built in the first phase .",
        "new_grounding": "port authority records describe fifty berths built in the second phase .",
        "source_urls": ["https://news.example.com/a", "https://news.example.com/b"],
    });
    let mut records: Vec<serde_json::Value> = (0..5).map(|_| clean.clone()).collect();
    let mut short = clean.clone();
    short["old_target"] = serde_json::json!("too short .");
    records.push(short);
    jsonl::write_jsonl(&input, None, &records).unwrap();

    let output = dir.path().join("extracted.jsonl");
    let out = run_ok(&[
        "extract",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["n_records"], 6);
    assert_eq!(report["n_emitted"], 11); // 12 candidates, one short target
    assert_eq!(report["rejected"]["target_length"], 1);
    assert_eq!(report["entailment_checked"], false);

    let examples: Vec<AblationExample> = jsonl::read_jsonl(&output).unwrap();
    assert_eq!(examples.len(), 11);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let files = desk_setup(dir.path(), 20);
    let config_path = dir.path().join("run.json");
    std::fs::write(&config_path, r#"{"order": 2, "lambda": 0.9}"#).unwrap();

    let report_path = dir.path().join("report.json");
    run_ok(&[
        "train",
        "--input",
        files.train.to_str().unwrap(),
        "--model-out",
        dir.path().join("cfg_model.json").to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
        "--lambda",
        "0.25",
        "--report",
        report_path.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["config"]["order"], 2); // from config file
    assert_eq!(report["config"]["lambda"], 0.25); // flag wins
}

#[test]
fn no_color_strips_ansi_from_verbose_notes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "synth",
            "--desk",
            "5",
            "--output",
            dir.path().join("a.jsonl").to_str().unwrap(),
            "--verbose",
        ])
        .env("ABLATEGEN_NO_COLOR", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("desk corpus"));
    assert!(!stderr.contains('\u{1b}'));
}
