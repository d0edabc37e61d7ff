//! Dataset construction: synthetic fact edits (numeric and month shifts)
//! and natural extraction from revision-pair records with quality filters.
//!
//! ```bash
//! cargo run -p ablategen --example build_datasets
//! ```

use ablategen::datagen::{
    extract_natural, synth_ablate, EditKind, EditRule, QualityConfig, RevisionPairRecord,
};
use ablategen::vocab::Example;

fn main() -> ablategen::Result<()> {
    // numeric edit: the shared fact "4" is perturbed in grounding and target
    let ex = Example::new(
        "rescue teams freed all 4 miners after the collapse .",
        "the town waited for news .",
        "all 4 miners were freed .",
    );
    let rule = EditRule {
        kind: EditKind::Numeric,
        seed: 11,
    };
    let (first, second) = synth_ablate(&ex, &rule)?;
    println!("numeric edit:");
    println!("  g  = {}", first.grounding);
    println!("  g' = {}", first.grounding_ablated);
    println!("  y  = {}", first.target);
    println!("  y' = {}", second.target);

    // month shift, case preserved
    let ex = Example::new(
        "The queen toured Canada in March of that year .",
        "",
        "her tour happened in March .",
    );
    let rule = EditRule {
        kind: EditKind::Chronological,
        seed: 5,
    };
    let (first, _) = synth_ablate(&ex, &rule)?;
    println!("\nchronological edit:");
    println!("  g  = {}", first.grounding);
    println!("  g' = {}", first.grounding_ablated);

    // natural extraction: one revision pair yields two mirrored examples
    let record = RevisionPairRecord {
        context: "the article covers the harbor . construction began early .".into(),
        old_target: "the harbor expansion added forty berths for cargo ships in its first phase ."
            .into(),
        new_target: "the harbor expansion added fifty berths for cargo ships in its second phase ."
            .into(),
        old_grounding: "port authority records describe forty berths built in the first phase ."
            .into(),
        new_grounding: "port authority records describe fifty berths built in the second phase ."
            .into(),
        source_urls: [
            "https://news.example.com/harbor-one".into(),
            "https://news.example.com/harbor-two".into(),
        ],
    };
    let mut short = record.clone();
    short.old_target = "too short .".into();
    short.new_target = "also short .".into();

    let outcome = extract_natural(&[record, short], &QualityConfig::default());
    println!("\nnatural extraction: {} examples survive", outcome.examples.len());
    for (reason, count) in &outcome.rejected {
        println!("  rejected {count} ({reason})");
    }
    for (i, ex) in outcome.examples.iter().enumerate() {
        println!("  example {i}: target = {}", ex.target);
    }
    Ok(())
}
