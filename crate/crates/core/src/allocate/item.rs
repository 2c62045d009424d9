//! Scores for a single training item (for example one artwork).
//!
//! The item's own class profile is matched against every prompt's class
//! profile; the dot products accumulate like a ledger column.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::waitlist::normalize_similarity_row;
use super::{apportion, SIMPLEX_TOLERANCE};
use crate::error::{Error, Result};
use crate::score::EventScore;

fn check_simplex(what: &str, row: &BTreeMap<String, f64>) -> Result<()> {
    let sum: f64 = row.values().sum();
    if row.values().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotNormalized(format!("{what} is not on the simplex (sum {sum})")));
    }
    Ok(())
}

fn same_classes(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, what: &str) -> Result<()> {
    if a.len() != b.len() || !a.keys().all(|k| b.contains_key(k)) {
        return Err(Error::ClassMismatch(format!("{what} covers different classes than the item")));
    }
    Ok(())
}

/// An item's probability vector `P_a` and normalized similarity row `S_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProfile {
    pub item_id: String,
    pub probability: BTreeMap<String, f64>,
    pub similarity: Option<BTreeMap<String, f64>>,
}

impl ItemProfile {
    /// `raw_similarity` is clamped at zero and normalized.
    pub fn new(
        item_id: impl Into<String>,
        probability: BTreeMap<String, f64>,
        raw_similarity: Option<&BTreeMap<String, f64>>,
    ) -> Result<Self> {
        let item_id = item_id.into();
        check_simplex(&format!("probability of item `{item_id}`"), &probability)?;
        let similarity = raw_similarity.map(normalize_similarity_row).transpose()?;
        if let Some(s) = &similarity {
            same_classes(s, &probability, "item similarity")?;
        }
        Ok(Self {
            item_id,
            probability,
            similarity,
        })
    }
}

/// Accumulated item score; idempotent on event id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub item_id: String,
    /// `Σ_p Σ_i P_ai P_ip`
    pub probability_score: f64,
    /// `Σ_p Σ_i S_ai S_ip` over events with a defined similarity row.
    pub similarity_score: f64,
    pub events: BTreeSet<String>,
}

impl ItemScore {
    pub fn new(item_id: impl Into<String>) -> Self {
        Self {
            item_id: item_id.into(),
            probability_score: 0.0,
            similarity_score: 0.0,
            events: BTreeSet::new(),
        }
    }

    /// Fold one event. Returns `false` for an already counted event id.
    pub fn ingest(&mut self, profile: &ItemProfile, event: &EventScore) -> Result<bool> {
        if self.events.contains(&event.event_id) {
            return Ok(false);
        }
        let p = &event.prob_scores.0;
        same_classes(p, &profile.probability, "event probabilities")?;
        check_simplex(&format!("probabilities of event `{}`", event.event_id), p)?;
        let sim_term = match (&profile.similarity, &event.sim_scores) {
            (Some(sa), Some(raw)) => match normalize_similarity_row(raw) {
                Ok(sp) => {
                    same_classes(&sp, sa, "event similarities")?;
                    sa.iter().map(|(k, v)| v * sp[k]).sum()
                }
                Err(Error::SimilarityUndefined) => 0.0,
                Err(e) => return Err(e),
            },
            _ => 0.0,
        };
        self.probability_score += profile.probability.iter().map(|(k, v)| v * p[k]).sum::<f64>();
        self.similarity_score += sim_term;
        self.events.insert(event.event_id.clone());
        Ok(true)
    }
}

pub fn score_item<'a, I>(profile: &ItemProfile, events: I) -> Result<ItemScore>
where
    I: IntoIterator<Item = &'a EventScore>,
{
    let mut score = ItemScore::new(profile.item_id.clone());
    for e in events {
        score.ingest(profile, e)?;
    }
    Ok(score)
}

/// `[belongs, not-belongs]` for one label.
pub type LabelPair = [f64; 2];

fn check_pairs(what: &str, pairs: &BTreeMap<String, LabelPair>) -> Result<()> {
    for (k, [a, b]) in pairs {
        if !(a.is_finite() && b.is_finite() && *a >= 0.0 && *b >= 0.0) || (a + b - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized(format!("{what}: pair for `{k}` is [{a}, {b}]")));
        }
    }
    Ok(())
}

/// Multi-label item score: `Σ_p Σ_i 𝐏_ai · 𝐏_ip` over two-component pairs.
pub fn score_item_multitask(item: &BTreeMap<String, LabelPair>, prompts: &[BTreeMap<String, LabelPair>]) -> Result<f64> {
    check_pairs("item", item)?;
    let mut total = 0.0;
    for (n, prompt) in prompts.iter().enumerate() {
        check_pairs(&format!("prompt {n}"), prompt)?;
        if prompt.len() != item.len() || !prompt.keys().all(|k| item.contains_key(k)) {
            return Err(Error::ClassMismatch(format!("prompt {n} covers different labels than the item")));
        }
        total += item
            .iter()
            .map(|(k, a)| {
                let b = prompt[k];
                a[0] * b[0] + a[1] * b[1]
            })
            .sum::<f64>();
    }
    Ok(total)
}

/// Recover the single-task score from a multi-task score whose pairs are
/// `[p, 1−p]` built from simplex vectors over `labels` classes:
/// each pair product is `2pq − p − q + 1`, so per prompt the multi-task sum
/// is `2·Σ_i p_i q_i + labels − 2`.
pub fn multitask_as_single_task(multitask: f64, labels: usize, prompts: usize) -> f64 {
    (multitask - (labels as f64 - 2.0) * prompts as f64) / 2.0
}

/// Policy fractions for dividing an item's revenue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopyrightSplit {
    pub item_provider: f64,
    pub tool_operator: f64,
    pub prompting_user: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyrightShares {
    pub item_provider: u64,
    pub tool_operator: u64,
    pub prompting_user: u64,
}

pub fn split_item_share(amount: u64, split: CopyrightSplit) -> Result<CopyrightShares> {
    let fractions = BTreeMap::from([
        ("item_provider".to_string(), split.item_provider),
        ("tool_operator".to_string(), split.tool_operator),
        ("prompting_user".to_string(), split.prompting_user),
    ]);
    check_simplex("copyright split", &fractions)?;
    let s = apportion(amount, &fractions)?;
    Ok(CopyrightShares {
        item_provider: s["item_provider"],
        tool_operator: s["tool_operator"],
        prompting_user: s["prompting_user"],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ProbVector;
    use crate::score::SourceMode;

    fn m(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn event(id: &str, p: &[(&str, f64)], s: Option<&[(&str, f64)]>) -> EventScore {
        EventScore {
            event_id: id.into(),
            prob_scores: ProbVector(m(p)),
            sim_scores: s.map(m),
            source_mode: SourceMode::Prompt,
            weight: 1.0,
        }
    }

    #[test]
    fn concentrated_item_reduces_to_class_column() {
        let profile = ItemProfile::new("art", m(&[("a", 0.0), ("b", 1.0)]), None).unwrap();
        let events = [event("1", &[("a", 0.3), ("b", 0.7)], None), event("2", &[("a", 0.9), ("b", 0.1)], None)];
        let s = score_item(&profile, &events).unwrap();
        assert!((s.probability_score - 0.8).abs() < 1e-15);
    }

    #[test]
    fn uniform_single_prompt_gives_one_over_c() {
        let u = [("a", 0.25), ("b", 0.25), ("c", 0.25), ("d", 0.25)];
        let profile = ItemProfile::new("art", m(&u), None).unwrap();
        let s = score_item(&profile, &[event("1", &u, None)]).unwrap();
        assert!((s.probability_score - 0.25).abs() < 1e-15);
    }

    #[test]
    fn duplicate_events_and_class_mismatch() {
        let profile = ItemProfile::new("art", m(&[("a", 0.5), ("b", 0.5)]), Some(&m(&[("a", 1.0), ("b", -1.0)]))).unwrap();
        let e = event("1", &[("a", 0.5), ("b", 0.5)], Some(&[("a", 0.2), ("b", 0.6)]));
        let s = score_item(&profile, [&e, &e]).unwrap();
        assert_eq!(s.events.len(), 1);
        assert!((s.similarity_score - 0.25).abs() < 1e-15);
        let bad = event("2", &[("a", 1.0)], None);
        assert!(matches!(score_item(&profile, [&bad]), Err(Error::ClassMismatch(_))));
    }

    #[test]
    fn multitask_examples() {
        let one = BTreeMap::from([("x".to_string(), [1.0, 0.0])]);
        assert_eq!(score_item_multitask(&one, &vec![one.clone(); 7]).unwrap(), 7.0);
        let half: BTreeMap<String, LabelPair> = ["x", "y", "z"].iter().map(|k| (k.to_string(), [0.5, 0.5])).collect();
        assert_eq!(score_item_multitask(&half, &vec![half.clone(); 4]).unwrap(), 0.5 * 3.0 * 4.0);
        let bad = BTreeMap::from([("x".to_string(), [0.7, 0.7])]);
        assert!(score_item_multitask(&bad, &[]).is_err());
    }

    #[test]
    fn copyright_split_is_exact() {
        let s = split_item_share(
            1001,
            CopyrightSplit {
                item_provider: 0.5,
                tool_operator: 0.3,
                prompting_user: 0.2,
            },
        )
        .unwrap();
        assert_eq!(s.item_provider + s.tool_operator + s.prompting_user, 1001);
        assert_eq!(s.item_provider, 501);
    }
}
