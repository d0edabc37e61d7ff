//! Fit the cache-augmented n-gram on a desk corpus, then watch the
//! grounding move token probabilities: the same target is scored under its
//! entailing grounding and under an ablated one.
//!
//! ```bash
//! cargo run -p ablategen --example train_and_score
//! ```

use ablategen::datagen::make_desk_corpus;
use ablategen::lm::{GroundedLM, LmParams};
use ablategen::vocab::tokenize_frozen;

fn main() -> ablategen::Result<()> {
    let (train, ablation) = make_desk_corpus(200, 42)?;
    let model = GroundedLM::fit(&train, &LmParams::default())?;
    println!(
        "fitted order-{} model, vocab {} tokens, lambda {}",
        model.background().order(),
        model.vocab().len(),
        model.lambda()
    );

    let ex = &ablation[0];
    let vocab = model.vocab();
    let grounding = tokenize_frozen(&ex.grounding, vocab);
    let ablated = tokenize_frozen(&ex.grounding_ablated, vocab);
    let context = tokenize_frozen(&ex.context, vocab);
    let target = tokenize_frozen(&ex.target, vocab);

    println!("\ngrounding:         {}", ex.grounding);
    println!("ablated grounding: {}", ex.grounding_ablated);
    println!("target:            {}", ex.target);

    let lp_g = model.sequence_logprob(&grounding, &context, &target, true)?;
    let lp_ablated = model.sequence_logprob(&ablated, &context, &target, true)?;
    println!("\nlog P(target | context, grounding)  = {lp_g:.4} nats");
    println!("log P(target | context, ablated)    = {lp_ablated:.4} nats");
    println!("gap = {:.4} nats ({:.1}x probability ratio)", lp_g - lp_ablated, (lp_g - lp_ablated).exp());

    // the gap is carried entirely by the edited fact token
    let prefix_len = target
        .ids()
        .iter()
        .position(|&id| vocab.token(id).is_some_and(|t| t.chars().all(|c| c.is_ascii_digit())))
        .expect("desk targets contain a number");
    let prefix = ablategen::TokenSeq(target.ids()[..prefix_len].to_vec());
    let fact_id = target.ids()[prefix_len] as usize;
    let with_g = model.next_token_dist(&grounding, &context, &prefix);
    let with_ablated = model.next_token_dist(&ablated, &context, &prefix);
    println!(
        "\nfact token {:?}: P = {:.4} under grounding, {:.4} under ablated grounding",
        vocab.token(fact_id as u32).unwrap(),
        with_g.probs[fact_id],
        with_ablated.probs[fact_id]
    );

    // serialization round-trips scores exactly
    let dir = std::env::temp_dir().join("ablategen_example_model.json");
    model.save(&dir)?;
    let reloaded = GroundedLM::load(&dir)?;
    let lp_again = reloaded.sequence_logprob(&grounding, &context, &target, true)?;
    println!("\nsaved + reloaded: score identical = {}", lp_again == lp_g);
    std::fs::remove_file(dir).ok();
    Ok(())
}
