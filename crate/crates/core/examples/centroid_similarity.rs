//! Similarity of a prompt to each class: the centroid shortcut against the
//! per-document average it replaces.

use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
use engagement_core::engine::{document_vector, Engine};
use engagement_core::sample;
use engagement_core::score::brute_force_similarity;

fn main() -> engagement_core::Result<()> {
    let corpus = sample::space_and_sports();
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
    let (engine, _) = Engine::train(config, &corpus, None)?;

    let prompt = engine.embed_text("Telescope pictures of a galaxy taken from orbit")?;
    let fast = engine.centroids().similarity(&prompt)?.expect("prompt has known terms");
    let training = corpus
        .documents()
        .iter()
        .map(|d| document_vector(engine.embedder(), d).map(|v| (d.class_id.clone(), v)))
        .collect::<engagement_core::Result<Vec<_>>>()?;
    let slow = brute_force_similarity(&prompt, training.iter().map(|(c, v)| (c.as_str(), v)))?
        .expect("prompt has known terms");

    println!("{:<8} {:>10} {:>10}", "class", "centroid", "average");
    for (class, s) in &fast {
        println!("{class:<8} {s:>10.6} {:>10.6}", slow[class]);
    }
    Ok(())
}
