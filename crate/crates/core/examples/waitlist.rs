//! Score providers whose documents are not in the trained model, then carve
//! a side pool for them out of the total.

use chrono::Utc;

use engagement_core::allocate::{allocate_with_waitlist, score_waitlist, Basis};
use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
use engagement_core::corpus::{Corpus, Document, Split};
use engagement_core::engine::Engine;
use engagement_core::sample;
use engagement_core::score::{normalize, PromptEvent, SourceMode};

fn main() -> engagement_core::Result<()> {
    let mut config = RunConfig::new(CorpusConfig {
        kind: CorpusKind::Manifest,
        path: "sample".into(),
        truncate_tokens: None,
    });
    config.embedding = EmbeddingConfig::Internal {
        k: 8,
        oversample: 4,
        power_iterations: 2,
        seed: 7,
    };
    let (engine, _) = Engine::train(config, &sample::space_and_sports(), None)?;
    let scorer = engine.scorer(SourceMode::Prompt);
    let mut ledger = engine.new_ledger();
    for (i, prompt) in [
        "How do astronauts train for a spacewalk?",
        "Which telescope found the new galaxy?",
        "What time is the hockey game tonight?",
    ]
    .iter()
    .enumerate()
    {
        ledger.ingest(&PromptEvent::new(format!("e{i}"), *prompt, Utc::now()), &scorer, engine.fingerprint())?;
    }
    let report = normalize(&ledger)?;

    let waitlisted = Corpus::new(
        vec![
            Document::text("astro/1", "astro-blog", "astro-blog", "Notes on planets, moons, and the probes that visit them."),
            Document::text("astro/2", "astro-blog", "astro-blog", "A guide to rocket stages and orbital launch windows."),
            Document::text("bake/1", "bakery", "bakery", "Sourdough starter, flour, water, and a long slow rise."),
        ],
        Split::Test,
    )?;
    let rows = engine.waitlist_rows(&waitlisted)?;
    let entries = score_waitlist(&report.probability_shares(), &rows)?;
    for e in &entries {
        println!("{:<12} W = {:.4}", e.provider_id, e.score);
    }

    let split = allocate_with_waitlist(10_000, &report, Basis::Probability, &entries, 0.05)?;
    println!("pool {} -> {:?}", split.pool, split.waitlist);
    print!("{}", split.trained.to_csv());
    Ok(())
}
