//! Fold prompt events into a ledger and print the per-class report.
//! Re-sending an event id leaves the ledger unchanged.

use chrono::{TimeZone, Utc};

use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
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
    let scorer = engine.scorer(SourceMode::Concat);
    let mut ledger = engine.new_ledger();

    let at = |s: i64| Utc.timestamp_opt(1_700_000_000 + s, 0).unwrap();
    let events = [
        PromptEvent::new("e1", "What fuel does a rocket booster burn?", at(0)),
        PromptEvent::new("e2", "Best way to roast vegetables?", at(1)).with_response("Olive oil, salt, high heat."),
        PromptEvent::new("e3", "Explain icing in hockey", at(2)).with_weight(2.0),
        PromptEvent::new("e1", "What fuel does a rocket booster burn?", at(0)),
    ];
    for e in &events {
        ledger.ingest(e, &scorer, engine.fingerprint())?;
    }
    println!("{} distinct events, total weight {}", ledger.total_events(), ledger.total_weight());
    print!("{}", normalize(&ledger)?.render_table());
    Ok(())
}
