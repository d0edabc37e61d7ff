//! Corpus-level BLEU and NIST over tokenized candidate/reference pairs.
//!
//! ```bash
//! cargo run -p ablategen --example lexical_metrics
//! ```

use ablategen::metrics::{bleu, nist, EvalPair};
use ablategen::vocab::{tokenize_build, Vocab};

fn main() -> ablategen::Result<()> {
    let data = [
        (
            "the bridge spans 300 meters across the bay .",
            "the bridge spans 300 meters across the bay .",
        ),
        (
            "the stadium holds 4000 visitors during matches .",
            "the stadium holds 4100 visitors during major matches .",
        ),
        (
            "officials opened the tunnel in march .",
            "the tunnel opened to traffic in march after delays .",
        ),
    ];

    let mut vocab = Vocab::new();
    let pairs: Vec<EvalPair> = data
        .iter()
        .map(|(candidate, reference)| EvalPair {
            candidate: tokenize_build(candidate, &mut vocab),
            reference: tokenize_build(reference, &mut vocab),
        })
        .collect();

    println!("corpus of {} pairs:", pairs.len());
    println!("  BLEU (max n=4, unsmoothed) = {:.4}", bleu(&pairs, 4, false)?);
    println!("  BLEU (smoothed)            = {:.4}", bleu(&pairs, 4, true)?);
    println!("  NIST (max n=5)             = {:.4}", nist(&pairs, 5)?);

    // a perfect corpus scores BLEU 1.0
    let perfect: Vec<EvalPair> = pairs
        .iter()
        .map(|p| EvalPair {
            candidate: p.reference.clone(),
            reference: p.reference.clone(),
        })
        .collect();
    println!("\nself-match corpus:");
    println!("  BLEU = {:.4}", bleu(&perfect, 4, false)?);
    println!("  NIST = {:.4} (maximal for these references)", nist(&perfect, 5)?);
    Ok(())
}
