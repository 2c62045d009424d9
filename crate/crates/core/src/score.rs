//! Per-prompt scoring against every provider class and the accumulating
//! ledger behind all allocations.
//!
//! Two independent mechanisms feed the ledger: classifier probabilities
//! `p_in` (on the simplex) and centroid similarities `s_pi` (in [-1, 1]).
//! Raw similarity sums may be negative; negatives are clamped only when a
//! report is normalized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::{FeatureRow, FeatureSpace, LinearClassifier, ProbVector};
use crate::embed::{
    class_centroid, cosine, ClassCentroid, Embedder, EmbeddingVector, InternalPipeline, SourceTag, Vocabulary,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceMode {
    Prompt,
    Response,
    #[default]
    Concat,
    Mean,
}

impl SourceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceMode::Prompt => "prompt",
            SourceMode::Response => "response",
            SourceMode::Concat => "concat",
            SourceMode::Mean => "mean",
        }
    }

    /// The texts this mode scores. `Mean` yields one or two texts; an empty
    /// response is skipped rather than averaged in.
    fn texts<'a>(self, event: &'a PromptEvent) -> Result<Vec<std::borrow::Cow<'a, str>>> {
        use std::borrow::Cow;
        let texts = match self {
            SourceMode::Prompt => vec![Cow::Borrowed(event.prompt.as_str())],
            SourceMode::Response => vec![Cow::Borrowed(event.response.as_str())],
            SourceMode::Concat if event.response.is_empty() => vec![Cow::Borrowed(event.prompt.as_str())],
            SourceMode::Concat => vec![Cow::Owned(format!("{}\n{}", event.prompt, event.response))],
            SourceMode::Mean if event.response.is_empty() => vec![Cow::Borrowed(event.prompt.as_str())],
            SourceMode::Mean => vec![Cow::Borrowed(event.prompt.as_str()), Cow::Borrowed(event.response.as_str())],
        };
        if texts.iter().all(|t| t.trim().is_empty()) {
            return Err(Error::EmptySource(self.as_str()));
        }
        Ok(texts)
    }
}

impl fmt::Display for SourceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prompt" => Ok(SourceMode::Prompt),
            "response" => Ok(SourceMode::Response),
            "concat" => Ok(SourceMode::Concat),
            "mean" => Ok(SourceMode::Mean),
            other => Err(Error::InvalidArgument(format!(
                "unknown source mode `{other}` (expected prompt, response, concat, or mean)"
            ))),
        }
    }
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEvent {
    pub event_id: String,
    pub prompt: String,
    #[serde(default)]
    pub response: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl PromptEvent {
    pub fn new(event_id: impl Into<String>, prompt: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self {
            event_id: event_id.into(),
            prompt: prompt.into(),
            response: String::new(),
            timestamp,
            weight: 1.0,
        }
    }

    pub fn with_response(mut self, response: impl Into<String>) -> Self {
        self.response = response.into();
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.event_id.is_empty() {
            return Err(Error::InvalidEvent("event_id is empty".into()));
        }
        if self.prompt.trim().is_empty() {
            return Err(Error::InvalidEvent(format!("event `{}` has an empty prompt", self.event_id)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidEvent(format!(
                "event `{}` has non-positive weight {}",
                self.event_id, self.weight
            )));
        }
        Ok(())
    }
}

/// Audit record of one scored event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScore {
    pub event_id: String,
    pub prob_scores: ProbVector,
    /// `None` when the event text embedded to the zero vector (or no
    /// similarity index is configured); such events add nothing to `sim_sum`.
    pub sim_scores: Option<BTreeMap<String, f64>>,
    pub source_mode: SourceMode,
    pub weight: f64,
}

/// Maps text into a classifier's input space.
pub trait Featurizer: Send + Sync {
    fn space(&self) -> FeatureSpace;
    fn features(&self, text: &str) -> Result<FeatureRow>;
}

impl Featurizer for Vocabulary {
    fn space(&self) -> FeatureSpace {
        FeatureSpace::TfidfSparse
    }

    fn features(&self, text: &str) -> Result<FeatureRow> {
        Ok(FeatureRow::Sparse(self.transform(text)))
    }
}

impl Featurizer for InternalPipeline {
    fn space(&self) -> FeatureSpace {
        FeatureSpace::ReducedDense
    }

    fn features(&self, text: &str) -> Result<FeatureRow> {
        Ok(FeatureRow::from(&self.embed(text)?))
    }
}

/// Elementwise mean of probability vectors over the same classes,
/// renormalized onto the simplex.
fn mean_prob(vs: Vec<ProbVector>) -> ProbVector {
    let n = vs.len() as f64;
    let mut it = vs.into_iter();
    let mut acc = it.next().expect("at least one vector").0;
    for v in it {
        for (k, p) in v.0 {
            *acc.get_mut(&k).expect("same classes") += p;
        }
    }
    acc.values_mut().for_each(|p| *p /= n);
    let s: f64 = acc.values().sum();
    acc.values_mut().for_each(|p| *p /= s);
    ProbVector(acc)
}

pub fn score_event_probability(
    event: &PromptEvent,
    model: &LinearClassifier,
    featurizer: &dyn Featurizer,
    mode: SourceMode,
) -> Result<ProbVector> {
    if featurizer.space() != model.feature_space() {
        return Err(Error::InvalidArgument(format!(
            "featurizer produces {} rows but the model expects {}",
            featurizer.space().as_str(),
            model.feature_space().as_str()
        )));
    }
    let probs = mode
        .texts(event)?
        .iter()
        .map(|t| model.predict_proba(&featurizer.features(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_prob(probs))
}

/// Precomputed characteristic vectors, one per class, in class-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidIndex {
    centroids: Vec<ClassCentroid>,
}

impl CentroidIndex {
    /// Build from `(class_id, vector)` pairs. Zero vectors are skipped; a
    /// class with only zero vectors is an error.
    pub fn build<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
    {
        let mut by_class: BTreeMap<&str, Vec<&EmbeddingVector>> = BTreeMap::new();
        for (c, v) in vectors {
            by_class.entry(c).or_default().push(v);
        }
        let centroids = by_class
            .into_iter()
            .map(|(c, vs)| class_centroid(c, vs))
            .collect::<Result<Vec<_>>>()?;
        Self::from_centroids(centroids)
    }

    pub fn from_centroids(mut centroids: Vec<ClassCentroid>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("no centroids".into()));
        }
        centroids.sort_by(|a, b| a.class_id.cmp(&b.class_id));
        for w in centroids.windows(2) {
            if w[0].class_id == w[1].class_id {
                return Err(Error::InvalidArgument(format!("duplicate centroid `{}`", w[0].class_id)));
            }
            w[0].vector.check_compatible(&w[1].vector)?;
        }
        Ok(Self { centroids })
    }

    pub fn centroids(&self) -> &[ClassCentroid] {
        &self.centroids
    }

    pub fn get(&self, class_id: &str) -> Option<&ClassCentroid> {
        self.centroids
            .binary_search_by(|c| c.class_id.as_str().cmp(class_id))
            .ok()
            .map(|i| &self.centroids[i])
    }

    pub fn class_ids(&self) -> Vec<&str> {
        self.centroids.iter().map(|c| c.class_id.as_str()).collect()
    }

    pub fn dims(&self) -> usize {
        self.centroids[0].vector.dims()
    }

    pub fn source(&self) -> &SourceTag {
        self.centroids[0].vector.source()
    }

    /// `s_pi = V_p·<V_i> / |V_p|` for every class; `None` for a zero `V_p`.
    pub fn similarity(&self, v: &EmbeddingVector) -> Result<Option<BTreeMap<String, f64>>> {
        let n = v.norm();
        if n == 0.0 {
            return Ok(None);
        }
        self.centroids
            .iter()
            .map(|c| Ok((c.class_id.clone(), (v.dot(&c.vector)? / n).clamp(-1.0, 1.0))))
            .collect::<Result<_>>()
            .map(Some)
    }
}

/// Literal mean of cosines against every nonzero training vector of each
/// class. Cost is linear in the corpus size.
pub fn brute_force_similarity<'a, I>(v: &EmbeddingVector, training: I) -> Result<Option<BTreeMap<String, f64>>>
where
    I: IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
{
    if v.norm() == 0.0 {
        return Ok(None);
    }
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (c, x) in training {
        let entry = acc.entry(c).or_default();
        if x.norm() == 0.0 {
            continue;
        }
        entry.0 += cosine(v, x)?;
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|(c, (sum, k))| {
            if k == 0 {
                Err(Error::ZeroVector)
            } else {
                Ok((c.to_string(), sum / k as f64))
            }
        })
        .collect::<Result<_>>()
        .map(Some)
}

fn mean_sim(maps: Vec<Option<BTreeMap<String, f64>>>) -> Option<BTreeMap<String, f64>> {
    let present: Vec<_> = maps.into_iter().flatten().collect();
    let n = present.len() as f64;
    let mut it = present.into_iter();
    let mut acc = it.next()?;
    for m in it {
        for (k, s) in m {
            *acc.get_mut(&k).expect("same classes") += s;
        }
    }
    acc.values_mut().for_each(|s| *s /= n);
    Some(acc)
}

pub fn score_event_similarity(
    event: &PromptEvent,
    centroids: &CentroidIndex,
    embedder: &dyn Embedder,
    mode: SourceMode,
) -> Result<Option<BTreeMap<String, f64>>> {
    let maps = mode
        .texts(event)?
        .iter()
        .map(|t| centroids.similarity(&embedder.embed(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_sim(maps))
}

/// Everything needed to score one event.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub model: &'a LinearClassifier,
    pub featurizer: &'a dyn Featurizer,
    pub similarity: Option<(&'a CentroidIndex, &'a dyn Embedder)>,
    pub mode: SourceMode,
}

impl Scorer<'_> {
    pub fn score(&self, event: &PromptEvent) -> Result<EventScore> {
        event.validate()?;
        let prob_scores = score_event_probability(event, self.model, self.featurizer, self.mode)?;
        let sim_scores = match self.similarity {
            Some((index, embedder)) => score_event_similarity(event, index, embedder, self.mode)?,
            None => None,
        };
        Ok(EventScore {
            event_id: event.event_id.clone(),
            prob_scores,
            sim_scores,
            source_mode: self.mode,
            weight: event.weight,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTotals {
    pub prob_sum: f64,
    pub sim_sum: f64,
    pub event_count: u64,
}

/// Per-class accumulated scores. Idempotent on `event_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLedger {
    pub(crate) fingerprint: String,
    pub(crate) totals: BTreeMap<String, ClassTotals>,
    pub(crate) total_events: u64,
    pub(crate) total_weight: f64,
    /// Events that contributed similarity scores.
    pub(crate) similarity_events: u64,
    pub(crate) last_timestamp: Option<DateTime<Utc>>,
    pub(crate) events: BTreeMap<String, EventScore>,
}

impl ScoreLedger {
    pub fn new<I, S>(fingerprint: impl Into<String>, class_ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            fingerprint: fingerprint.into(),
            totals: class_ids.into_iter().map(|c| (c.into(), ClassTotals::default())).collect(),
            total_events: 0,
            total_weight: 0.0,
            similarity_events: 0,
            last_timestamp: None,
            events: BTreeMap::new(),
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn totals(&self) -> &BTreeMap<String, ClassTotals> {
        &self.totals
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &str> {
        self.totals.keys().map(String::as_str)
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn similarity_events(&self) -> u64 {
        self.similarity_events
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.last_timestamp
    }

    pub fn event(&self, event_id: &str) -> Option<&EventScore> {
        self.events.get(event_id)
    }

    /// Applied event scores in event id order.
    pub fn events(&self) -> impl Iterator<Item = &EventScore> {
        self.events.values()
    }

    pub fn contains(&self, event_id: &str) -> bool {
        self.events.contains_key(event_id)
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<()> {
        if fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                actual: fingerprint.to_string(),
            });
        }
        Ok(())
    }

    fn check_classes<'a>(&self, keys: impl Iterator<Item = &'a String>) -> Result<()> {
        let got: BTreeSet<&str> = keys.map(String::as_str).collect();
        if got.len() != self.totals.len() || !self.totals.keys().all(|k| got.contains(k.as_str())) {
            return Err(Error::ClassMismatch(format!(
                "event scores {} classes, ledger holds {}",
                got.len(),
                self.totals.len()
            )));
        }
        Ok(())
    }

    /// Fold a computed score into the totals. Returns `false` (and changes
    /// nothing) when the event id was already applied.
    pub fn apply(&mut self, score: EventScore, timestamp: DateTime<Utc>) -> Result<bool> {
        if self.events.contains_key(&score.event_id) {
            return Ok(false);
        }
        if !(score.weight > 0.0 && score.weight.is_finite()) {
            return Err(Error::InvalidEvent(format!("weight {} is not positive", score.weight)));
        }
        self.check_classes(score.prob_scores.0.keys())?;
        if let Some(sim) = &score.sim_scores {
            self.check_classes(sim.keys())?;
        }
        let w = score.weight;
        for (class_id, totals) in self.totals.iter_mut() {
            totals.prob_sum += w * score.prob_scores.0[class_id];
            if let Some(sim) = &score.sim_scores {
                totals.sim_sum += w * sim[class_id];
            }
            totals.event_count += 1;
        }
        self.total_events += 1;
        self.total_weight += w;
        if score.sim_scores.is_some() {
            self.similarity_events += 1;
        }
        self.last_timestamp = Some(self.last_timestamp.map_or(timestamp, |t| t.max(timestamp)));
        self.events.insert(score.event_id.clone(), score);
        Ok(true)
    }

    /// Score and fold one event; a repeated event id returns the stored
    /// score untouched.
    pub fn ingest(&mut self, event: &PromptEvent, scorer: &Scorer<'_>, fingerprint: &str) -> Result<EventScore> {
        self.check_fingerprint(fingerprint)?;
        if let Some(existing) = self.events.get(&event.event_id) {
            return Ok(existing.clone());
        }
        let score = scorer.score(event)?;
        self.apply(score.clone(), event.timestamp)?;
        Ok(score)
    }

    pub fn normalize(&self) -> Result<EngagementReport> {
        normalize(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub prob_sum: f64,
    pub sim_sum: f64,
    /// `P_i`
    pub probability_share: f64,
    /// `S_i`; absent when no class has positive similarity mass.
    pub similarity_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub fingerprint: String,
    pub total_events: u64,
    pub total_weight: f64,
    /// Timestamp of the latest ingested event.
    pub generated_at: Option<DateTime<Utc>>,
    pub similarity_defined: bool,
    pub classes: BTreeMap<String, ReportRow>,
}

impl EngagementReport {
    pub fn probability_shares(&self) -> BTreeMap<String, f64> {
        self.classes.iter().map(|(k, r)| (k.clone(), r.probability_share)).collect()
    }

    pub fn similarity_shares(&self) -> Result<BTreeMap<String, f64>> {
        if !self.similarity_defined {
            return Err(Error::SimilarityUndefined);
        }
        Ok(self
            .classes
            .iter()
            .map(|(k, r)| (k.clone(), r.similarity_share.unwrap_or(0.0)))
            .collect())
    }

    /// Rows by descending probability sum, ties by class id.
    pub fn ranked(&self) -> Vec<(&str, &ReportRow)> {
        let mut rows: Vec<_> = self.classes.iter().map(|(k, r)| (k.as_str(), r)).collect();
        rows.sort_by(|a, b| b.1.prob_sum.total_cmp(&a.1.prob_sum).then_with(|| a.0.cmp(b.0)));
        rows
    }

    /// Fixed-width per-class table.
    pub fn render_table(&self) -> String {
        let width = self.classes.keys().map(String::len).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>10}  {:>14}  {:>10}",
            "class", "prob_score", "P_i", "sim_score", "S_i"
        );
        for (class_id, r) in self.ranked() {
            let s = r.similarity_share.map_or_else(|| "-".to_string(), |s| format!("{s:.6}"));
            let _ = writeln!(
                out,
                "{class_id:<width$}  {:>14.4}  {:>10.6}  {:>14.4}  {s:>10}",
                r.prob_sum, r.probability_share, r.sim_sum
            );
        }
        let _ = writeln!(
            out,
            "events: {}  weight: {:.4}  similarity: {}",
            self.total_events,
            self.total_weight,
            if self.similarity_defined { "defined" } else { "undefined" }
        );
        out
    }
}

/// `P_i = prob_sum_i / Σ prob_sum`; `S_i = max(s_i, 0) / Σ max(s_j, 0)`.
pub fn normalize(ledger: &ScoreLedger) -> Result<EngagementReport> {
    if ledger.total_events == 0 {
        return Err(Error::EmptyLedger);
    }
    let prob_total: f64 = ledger.totals.values().map(|t| t.prob_sum).sum();
    let sim_total: f64 = ledger.totals.values().map(|t| t.sim_sum.max(0.0)).sum();
    let similarity_defined = sim_total > 0.0;
    let classes = ledger
        .totals
        .iter()
        .map(|(k, t)| {
            (
                k.clone(),
                ReportRow {
                    prob_sum: t.prob_sum,
                    sim_sum: t.sim_sum,
                    probability_share: t.prob_sum / prob_total,
                    similarity_share: similarity_defined.then(|| t.sim_sum.max(0.0) / sim_total),
                },
            )
        })
        .collect();
    Ok(EngagementReport {
        fingerprint: ledger.fingerprint.clone(),
        total_events: ledger.total_events,
        total_weight: ledger.total_weight,
        generated_at: ledger.last_timestamp,
        similarity_defined,
        classes,
    })
}

/// One event's per-class probabilities and similarities, best first.
pub fn render_event_table(score: &EventScore) -> String {
    let width = score.prob_scores.0.keys().map(String::len).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}", "class", "p", "s");
    for (class_id, p) in score.prob_scores.ranked() {
        let s = score
            .sim_scores
            .as_ref()
            .map_or_else(|| "-".to_string(), |m| format!("{:.4}", m[class_id]));
        let _ = writeln!(out, "{class_id:<width$}  {p:>10.4}  {s:>10}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(secs, 0).unwrap()
    }

    fn score(id: &str, probs: &[(&str, f64)], sims: Option<&[(&str, f64)]>, weight: f64) -> EventScore {
        EventScore {
            event_id: id.into(),
            prob_scores: ProbVector(probs.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
            sim_scores: sims.map(|s| s.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
            source_mode: SourceMode::Concat,
            weight,
        }
    }

    #[test]
    fn normalize_examples() {
        let mut l = ScoreLedger::new("fp", ["a", "b"]);
        l.apply(score("e1", &[("a", 0.75), ("b", 0.25)], None, 1.0), ts(1)).unwrap();
        l.apply(score("e2", &[("a", 0.75), ("b", 0.25)], None, 3.0), ts(2)).unwrap();
        let r = l.normalize().unwrap();
        assert_eq!(r.classes["a"].probability_share, 0.75);
        assert!(!r.similarity_defined);
        assert!(matches!(r.similarity_shares(), Err(Error::SimilarityUndefined)));
        assert_eq!(r.generated_at, Some(ts(2)));

        let mut l = ScoreLedger::new("fp", ["a", "b", "c"]);
        let p = [("a", 1.0 / 3.0), ("b", 1.0 / 3.0), ("c", 1.0 / 3.0)];
        l.apply(score("e", &p, Some(&[("a", 2.0), ("b", -1.0), ("c", 2.0)]), 1.0), ts(0)).unwrap();
        let s = l.normalize().unwrap().similarity_shares().unwrap();
        assert_eq!(s, BTreeMap::from([("a".into(), 0.5), ("b".into(), 0.0), ("c".into(), 0.5)]));

        let mut single = ScoreLedger::new("fp", ["only"]);
        single.apply(score("e", &[("only", 1.0)], Some(&[("only", 0.3)]), 1.0), ts(0)).unwrap();
        let r = single.normalize().unwrap();
        assert_eq!(r.classes["only"].probability_share, 1.0);
        assert_eq!(r.classes["only"].similarity_share, Some(1.0));
    }

    #[test]
    fn empty_ledger_cannot_be_normalized() {
        assert!(matches!(ScoreLedger::new("fp", ["a"]).normalize(), Err(Error::EmptyLedger)));
    }

    #[test]
    fn duplicate_event_is_a_no_op() {
        let mut l = ScoreLedger::new("fp", ["a", "b"]);
        let s = score("e1", &[("a", 0.6), ("b", 0.4)], Some(&[("a", 0.1), ("b", 0.2)]), 2.0);
        assert!(l.apply(s.clone(), ts(0)).unwrap());
        let once = l.clone();
        assert!(!l.apply(s, ts(5)).unwrap());
        assert_eq!(l, once);
        assert_eq!(l.totals()["a"].prob_sum, 1.2);
        assert_eq!(l.totals()["b"].event_count, 1);
    }

    #[test]
    fn class_set_mismatch_is_rejected() {
        let mut l = ScoreLedger::new("fp", ["a", "b"]);
        assert!(matches!(
            l.apply(score("e", &[("a", 1.0)], None, 1.0), ts(0)),
            Err(Error::ClassMismatch(_))
        ));
    }

    #[test]
    fn centroid_fast_path_matches_brute_force() {
        let v = |x: &[f64]| EmbeddingVector::new(x.to_vec(), SourceTag::Internal).unwrap();
        let train = [
            ("a", v(&[1.0, 0.2, -0.3])),
            ("a", v(&[0.5, 0.5, 0.1])),
            ("a", v(&[0.0, 0.0, 0.0])),
            ("b", v(&[-0.4, 1.0, 0.0])),
            ("b", v(&[-0.4, 1.0, 0.0])),
        ];
        let pairs = || train.iter().map(|(c, x)| (*c, x));
        let index = CentroidIndex::build(pairs()).unwrap();
        let p = v(&[0.3, -0.7, 2.0]);
        let fast = index.similarity(&p).unwrap().unwrap();
        let slow = brute_force_similarity(&p, pairs()).unwrap().unwrap();
        for (k, f) in &fast {
            assert!((f - slow[k]).abs() <= 1e-12 * slow[k].abs().max(1e-300), "{k}");
        }
        assert!(index.similarity(&v(&[0.0, 0.0, 0.0])).unwrap().is_none());
    }

    #[test]
    fn source_mode_text_selection() {
        let e = PromptEvent::new("e", "why is the sky blue", ts(0));
        assert!(matches!(SourceMode::Response.texts(&e), Err(Error::EmptySource("response"))));
        assert_eq!(SourceMode::Concat.texts(&e).unwrap(), ["why is the sky blue"]);
        let e = e.with_response("rayleigh scattering");
        assert_eq!(SourceMode::Concat.texts(&e).unwrap(), ["why is the sky blue\nrayleigh scattering"]);
        assert_eq!(SourceMode::Mean.texts(&e).unwrap().len(), 2);
        assert_eq!("mean".parse::<SourceMode>().unwrap(), SourceMode::Mean);
        assert!("both".parse::<SourceMode>().is_err());
    }

    #[test]
    fn event_validation() {
        assert!(PromptEvent::new("e", "  ", ts(0)).validate().is_err());
        assert!(PromptEvent::new("", "hi there", ts(0)).validate().is_err());
        assert!(PromptEvent::new("e", "hi there", ts(0)).with_weight(0.0).validate().is_err());
        let json = r#"{"event_id":"x","prompt":"p","timestamp":"2024-01-01T00:00:00Z"}"#;
        let e: PromptEvent = serde_json::from_str(json).unwrap();
        assert_eq!(e.weight, 1.0);
        assert!(e.response.is_empty());
    }

    #[test]
    fn mean_of_identical_probabilities_is_unchanged() {
        let p = ProbVector(BTreeMap::from([("a".into(), 0.2), ("b".into(), 0.8)]));
        let m = mean_prob(vec![p.clone(), p.clone()]);
        for (k, v) in p.iter() {
            assert!((m.get(k).unwrap() - v).abs() < 1e-15);
        }
    }

    #[test]
    fn table_lists_top_class_first() {
        let mut l = ScoreLedger::new("fp", ["alt.atheism", "sci.space"]);
        l.apply(score("e", &[("alt.atheism", 0.1), ("sci.space", 0.9)], None, 1.0), ts(0)).unwrap();
        let t = l.normalize().unwrap().render_table();
        let first_row = t.lines().nth(1).unwrap();
        assert!(first_row.starts_with("sci.space"));
    }
}
