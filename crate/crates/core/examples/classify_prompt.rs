//! Train on the bundled sample corpus and classify a few prompts.

use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
use engagement_core::engine::Engine;
use engagement_core::sample;

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
    let (engine, summary) = Engine::train(config, &sample::space_and_sports(), None)?;
    println!("{} documents, {} classes", summary.documents, summary.classes);

    for prompt in [
        "When does the next rocket launch to the space station?",
        "Who scored the winning goal in overtime?",
        "How long should bread dough rise?",
    ] {
        let p = engine.classify_text(prompt)?;
        let (top, prob) = p.argmax().expect("at least two classes");
        println!("{prompt}\n  -> {top} ({prob:.3})");
        for (class, v) in p.iter() {
            println!("     {class:<8} {v:.4}");
        }
    }
    Ok(())
}
