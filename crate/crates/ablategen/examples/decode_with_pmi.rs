//! Inference-time support-score decoding: compare the base distribution
//! with the interpolation and addition transforms across the alpha grid,
//! then sample sentences under each policy.
//!
//! ```bash
//! cargo run -p ablategen --example decode_with_pmi
//! ```

use ablategen::datagen::make_desk_corpus;
use ablategen::decode::{generate, policy_dist, top_p_filter, DecodingPolicy};
use ablategen::lm::{GroundedLM, LmParams};
use ablategen::vocab::tokenize_frozen;
use ablategen::{SamplerConfig, StopRule, TokenSeq};

fn main() -> ablategen::Result<()> {
    let (train, _) = make_desk_corpus(200, 9)?;
    let grounded = GroundedLM::fit(&train, &LmParams::default())?;
    let ungrounded = grounded.ungrounded_view();
    let vocab = grounded.vocab();

    // take one corpus example and stop right before its fact number
    let ex = &train[0];
    let grounding = tokenize_frozen(&ex.grounding, vocab);
    let context = tokenize_frozen(&ex.context, vocab);
    let target = tokenize_frozen(&ex.target, vocab);
    let fact_pos = target
        .ids()
        .iter()
        .position(|&id| {
            vocab
                .token(id)
                .is_some_and(|t| t.chars().all(|c| c.is_ascii_digit()))
        })
        .expect("desk targets contain a number");
    let prefix = TokenSeq(target.ids()[..fact_pos].to_vec());
    let fact = target.ids()[fact_pos] as usize;
    let fact_text = vocab.token(fact as u32).unwrap().to_string();

    // a token that only the grounding supplies gets the largest support
    // score; the shared fact number is supported too, but the background
    // already predicts it from context
    let grounding_only = vocab.id("officials").unwrap() as usize;
    println!("grounding: {}", ex.grounding);
    println!("prefix:    {:?}", prefix.to_text(vocab));
    println!("\nnext-token probability of the fact {fact_text:?} / grounding-only \"officials\":");
    let base = policy_dist(
        &grounded,
        &ungrounded,
        &DecodingPolicy::base(),
        &grounding,
        &context,
        &prefix,
    )?;
    println!(
        "  base                {:.4} / {:.4}",
        base.probs[fact], base.probs[grounding_only]
    );
    for alpha in [0.1, 0.3, 0.5] {
        let interp = policy_dist(
            &grounded,
            &ungrounded,
            &DecodingPolicy::pmi_interp(alpha)?,
            &grounding,
            &context,
            &prefix,
        )?;
        let add = policy_dist(
            &grounded,
            &ungrounded,
            &DecodingPolicy::pmi_add(alpha)?,
            &grounding,
            &context,
            &prefix,
        )?;
        println!(
            "  alpha {alpha:.1}: interp   {:.4} / {:.4}   add {:.4} / {:.4}",
            interp.probs[fact],
            interp.probs[grounding_only],
            add.probs[fact],
            add.probs[grounding_only]
        );
    }

    // nucleus filtering keeps the smallest prefix reaching the threshold
    let filtered = top_p_filter(&base, 0.5);
    let kept = filtered.probs.iter().filter(|&&p| p > 0.0).count();
    println!("\nnucleus p=0.5 keeps {kept} of {} tokens", vocab.event_len());

    let sampler = SamplerConfig {
        top_p: 0.5,
        max_tokens: 32,
        seed: 17,
        stop: StopRule::Sentence,
    };
    println!("\nsampled continuations of \"the report describes the bridge .\":");
    for (name, policy) in [
        ("base", DecodingPolicy::base()),
        ("pmi_add(0.5)", DecodingPolicy::pmi_add(0.5)?),
    ] {
        let out = generate(
            &grounded,
            &ungrounded,
            &policy,
            &sampler,
            &grounding,
            &context,
        )?;
        println!("  {name:<13} {}", out.to_text(vocab));
    }

    // same seed, same inputs: identical samples
    let again = generate(
        &grounded,
        &ungrounded,
        &DecodingPolicy::base(),
        &sampler,
        &grounding,
        &context,
    )?;
    let first = generate(
        &grounded,
        &ungrounded,
        &DecodingPolicy::base(),
        &sampler,
        &grounding,
        &context,
    )?;
    println!(
        "\ndeterminism check: {}",
        if first == again { "identical" } else { "MISMATCH" }
    );
    let _: TokenSeq = again;
    Ok(())
}
