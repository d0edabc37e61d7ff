//! Loss-truncation training on a noisy stream: 10% of targets are
//! scrambled, and the dynamic loss window drops them. The grounded variant
//! additionally drops examples whose grounding does not support the target.
//!
//! ```bash
//! cargo run -p ablategen --example loss_truncation
//! ```

use ablategen::datagen::make_desk_corpus;
use ablategen::lm::LmParams;
use ablategen::truncate::{train_loss_truncated, TruncationConfig, TruncationMode};
use ablategen::vocab::surface_tokens;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ablategen::Result<()> {
    let (mut corpus, _) = make_desk_corpus(1000, 3)?;

    // scramble every tenth target with tokens drawn from the corpus pool
    let pool: Vec<String> = {
        let mut seen = std::collections::BTreeSet::new();
        for ex in &corpus {
            seen.extend(surface_tokens(&ex.target));
        }
        seen.into_iter().collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let corrupted: Vec<usize> = (0..corpus.len()).step_by(10).collect();
    for &i in &corrupted {
        let len = surface_tokens(&corpus[i].target).len();
        corpus[i].target = (0..len)
            .map(|_| pool[rng.gen_range(0..pool.len())].clone())
            .collect::<Vec<_>>()
            .join(" ");
    }

    let params = LmParams::default();
    let config = TruncationConfig::default();
    let outcome = train_loss_truncated(&corpus, &config, &params)?;
    let dropped_corrupted = corrupted
        .iter()
        .filter(|&&i| !outcome.decisions[i].kept)
        .count();
    println!(
        "basic truncation (keep_c {}): kept {}/{} examples",
        config.keep_c,
        outcome.kept,
        corpus.len()
    );
    println!(
        "corrupted targets dropped: {dropped_corrupted}/{}",
        corrupted.len()
    );

    // grounded mode: replace every tenth grounding with unrelated text
    let (mut grounded_corpus, _) = make_desk_corpus(1000, 4)?;
    let unsupported: Vec<usize> = (5..grounded_corpus.len()).step_by(10).collect();
    for &i in &unsupported {
        grounded_corpus[i].grounding =
            "unrelated bulletin covering assorted topics without overlap".into();
    }
    let grounded_config = TruncationConfig {
        mode: TruncationMode::Grounded,
        ..TruncationConfig::default()
    };
    let outcome = train_loss_truncated(&grounded_corpus, &grounded_config, &params)?;
    let dropped_unsupported = unsupported
        .iter()
        .filter(|&&i| !outcome.decisions[i].kept)
        .count();
    println!(
        "\ngrounded truncation (keep_c_gnd {}): kept {}/{} examples",
        grounded_config.keep_c_gnd,
        outcome.kept,
        grounded_corpus.len()
    );
    println!(
        "unsupported-grounding examples dropped: {dropped_unsupported}/{}",
        unsupported.len()
    );

    // a peek at the audit trail
    let d = outcome
        .decisions
        .iter()
        .find(|d| d.loss_threshold.is_some())
        .unwrap();
    println!(
        "\nfirst thresholded decision: index {}, loss {:.3} vs {:.3}, gap {:.3} vs {:.3}, kept {}",
        d.index,
        d.loss,
        d.loss_threshold.unwrap(),
        d.gap.unwrap(),
        d.gap_threshold.unwrap(),
        d.kept
    );
    Ok(())
}
