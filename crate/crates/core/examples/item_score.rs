//! Score a single training item against the prompts seen so far, and the
//! two-component label form that reduces to it.

use std::collections::BTreeMap;

use chrono::Utc;

use engagement_core::allocate::{multitask_as_single_task, score_item, score_item_multitask, LabelPair};
use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
use engagement_core::engine::Engine;
use engagement_core::sample;
use engagement_core::score::{PromptEvent, SourceMode};

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
    let events = ["Is there water on the moon?", "Rules for a penalty shot"]
        .iter()
        .enumerate()
        .map(|(i, p)| engine.score(&PromptEvent::new(format!("e{i}"), *p, Utc::now()), SourceMode::Prompt))
        .collect::<engagement_core::Result<Vec<_>>>()?;

    let item = engine.item_profile(
        "moon-photo-caption",
        Some("The lander photographed craters on the moon surface."),
        None,
    )?;
    let score = score_item(&item, &events)?;
    println!(
        "{}: probability {:.4}, similarity {:.4} over {} prompts",
        score.item_id,
        score.probability_score,
        score.similarity_score,
        score.events.len()
    );

    let pairs = |p: &BTreeMap<String, f64>| -> BTreeMap<String, LabelPair> {
        p.iter().map(|(k, v)| (k.clone(), [*v, 1.0 - *v])).collect()
    };
    let prompts: Vec<_> = events.iter().map(|e| pairs(&e.prob_scores.0)).collect();
    let multi = score_item_multitask(&pairs(&item.probability), &prompts)?;
    let classes = item.probability.len();
    println!(
        "pair form {multi:.4}, reduced {:.4}",
        multitask_as_single_task(multi, classes, prompts.len())
    );
    Ok(())
}
