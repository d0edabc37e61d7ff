//! Factual-ablation evaluation end to end: build the desk corpus, fit the
//! model, and report accuracy plus margin-accuracy under the base policy
//! and the support-score policies.
//!
//! ```bash
//! cargo run -p ablategen --example ablation_eval
//! ```

use ablategen::ablation::evaluate;
use ablategen::datagen::make_desk_corpus;
use ablategen::decode::DecodingPolicy;
use ablategen::lm::{GroundedLM, LmParams};

fn main() -> ablategen::Result<()> {
    let (train, ablation) = make_desk_corpus(200, 42)?;
    let grounded = GroundedLM::fit(&train, &LmParams::default())?;
    let ungrounded = grounded.ungrounded_view();
    let margins = vec![2.0f64.ln(), 100.0f64.ln()];

    println!("policy            accuracy   margin ln(2)   margin ln(100)   mean gap");
    for (name, policy) in [
        ("base", DecodingPolicy::base()),
        ("pmi_interp(0.5)", DecodingPolicy::pmi_interp(0.5)?),
        ("pmi_add(0.3)", DecodingPolicy::pmi_add(0.3)?),
        ("pmi_add(0.5)", DecodingPolicy::pmi_add(0.5)?),
    ] {
        let report = evaluate(&grounded, &ungrounded, &policy, &ablation, &margins)?;
        let mean_gap = report
            .pairs
            .iter()
            .map(|p| p.logp_g - p.logp_g_ablated)
            .sum::<f64>()
            / report.pairs.len() as f64;
        println!(
            "{name:<17} {:<10.3} {:<14.3} {:<16.3} {mean_gap:.3}",
            report.accuracy, report.margin_acc[0].value, report.margin_acc[1].value
        );
    }

    println!("\nthe desk corpus is constructed so the base model always prefers");
    println!("the entailing grounding; support-score policies widen the gap.");
    Ok(())
}
