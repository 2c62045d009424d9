//! Multinomial logistic regression trained by seeded SGD.
//!
//! Probabilities come from a softmax over affine class scores, so every
//! output lies on the simplex. Class ids are kept in lexicographic order,
//! which makes "first maximum" the documented argmax tie-break.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, ArtifactKind};
use crate::embed::{EmbeddingVector, SparseVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSpace {
    TfidfSparse,
    ReducedDense,
}

impl FeatureSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpace::TfidfSparse => "tfidf-sparse",
            FeatureSpace::ReducedDense => "reduced-dense",
        }
    }
}

/// One input row in either feature space.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureRow {
    Sparse(SparseVector),
    Dense(Vec<f64>),
}

impl FeatureRow {
    fn check(&self, features: usize) -> Result<()> {
        match self {
            FeatureRow::Sparse(s) => match s.indices.last() {
                Some(&i) if i as usize >= features => Err(Error::DimensionMismatch {
                    expected: features,
                    actual: i as usize + 1,
                }),
                _ => Ok(()),
            },
            FeatureRow::Dense(d) if d.len() != features => Err(Error::DimensionMismatch {
                expected: features,
                actual: d.len(),
            }),
            FeatureRow::Dense(_) => Ok(()),
        }
    }

    fn dot(&self, w: &[f64]) -> f64 {
        match self {
            FeatureRow::Sparse(s) => s.dot_dense(w),
            FeatureRow::Dense(d) => d.iter().zip(w).map(|(x, w)| x * w).sum(),
        }
    }

    /// `w += a * x`
    fn axpy(&self, a: f64, w: &mut [f64]) {
        match self {
            FeatureRow::Sparse(s) => s.iter().for_each(|(j, x)| w[j] += a * x),
            FeatureRow::Dense(d) => d.iter().zip(w).for_each(|(x, w)| *w += a * x),
        }
    }

    /// Every feature multiplied by `c`.
    pub fn scaled(&self, c: f64) -> FeatureRow {
        match self {
            FeatureRow::Sparse(s) => FeatureRow::Sparse(SparseVector {
                indices: s.indices.clone(),
                values: s.values.iter().map(|v| v * c).collect(),
            }),
            FeatureRow::Dense(d) => FeatureRow::Dense(d.iter().map(|v| v * c).collect()),
        }
    }
}

impl From<&EmbeddingVector> for FeatureRow {
    fn from(v: &EmbeddingVector) -> Self {
        FeatureRow::Dense(v.values().to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    /// Initial step size; decays as `lr / sqrt(1 + epoch)`.
    pub learning_rate: f64,
    /// Coefficient of `(λ/2)·|W|²` in the per-sample objective.
    pub l2_penalty: f64,
    pub seed: u64,
    /// Per-class fraction withheld for the held-out accuracy report. A class
    /// never loses its last training document.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.5,
            l2_penalty: 1e-6,
            seed: 42,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_size: usize,
    pub heldout_size: usize,
    pub heldout_accuracy: Option<f64>,
    /// Mean cross-entropy over the final epoch's samples.
    pub final_epoch_loss: f64,
}

/// Class id → probability. Entries are nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(pub BTreeMap<String, f64>);

impl ProbVector {
    pub fn get(&self, class_id: &str) -> Option<f64> {
        self.0.get(class_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }

    /// Highest-probability class; ties go to the smallest class id.
    pub fn argmax(&self) -> Option<(&str, f64)> {
        self.iter()
            .fold(None, |best: Option<(&str, f64)>, (k, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((k, v)),
            })
    }

    /// Classes by descending probability, ties by class id.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    class_ids: Vec<String>,
    features: usize,
    /// Row-major `C × F`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    feature_space: FeatureSpace,
    config: TrainConfig,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn class_index(class_ids: &[String], labels: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            class_ids
                .binary_search(l)
                .map_err(|_| Error::Training(format!("label `{l}` is not a known class")))
        })
        .collect()
}

/// Deterministic stratified split: returns (train, holdout) row indices.
fn holdout_split(labels: &[usize], n_classes: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for mut rows in by_class {
        rows.shuffle(rng);
        let n_held = ((rows.len() as f64 * fraction).floor() as usize).min(rows.len().saturating_sub(1));
        held.extend_from_slice(&rows[..n_held]);
        train.extend_from_slice(&rows[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

impl LinearClassifier {
    /// Fit on `rows` with class `labels`. At least two distinct classes are
    /// required.
    pub fn train(
        rows: &[FeatureRow],
        labels: &[String],
        features: usize,
        feature_space: FeatureSpace,
        config: TrainConfig,
    ) -> Result<(Self, TrainReport)> {
        if rows.len() != labels.len() {
            return Err(Error::Training(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite())
            || !(config.l2_penalty >= 0.0 && config.l2_penalty.is_finite())
            || !(0.0..1.0).contains(&config.holdout_fraction)
        {
            return Err(Error::InvalidArgument(format!("bad training config {config:?}")));
        }
        let class_ids: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if class_ids.len() < 2 {
            return Err(Error::Training(format!(
                "need at least two classes, found {}",
                class_ids.len()
            )));
        }
        for r in rows {
            r.check(features)?;
        }
        let y = class_index(&class_ids, labels)?;
        let c = class_ids.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (train_idx, held_idx) = holdout_split(&y, c, config.holdout_fraction, &mut rng);

        // W = scale · V, so the L2 shrink is O(1) per step.
        let mut v = vec![0.0; c * features];
        let mut scale = 1.0f64;
        let mut b = vec![0.0; c];
        let mut z = vec![0.0; c];
        let mut order = train_idx.clone();
        let mut final_epoch_loss = 0.0;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let lr = config.learning_rate / (1.0 + epoch as f64).sqrt();
            let mut loss = 0.0;
            for &i in &order {
                let x = &rows[i];
                for k in 0..c {
                    z[k] = scale * x.dot(&v[k * features..(k + 1) * features]) + b[k];
                }
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
                let sample_loss = lse - z[y[i]];
                if !sample_loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, row {i} (scale {scale:e}, lr {lr:e})"
                    )));
                }
                loss += sample_loss;
                softmax_in_place(&mut z);
                z[y[i]] -= 1.0;

                scale *= 1.0 - lr * config.l2_penalty;
                for k in 0..c {
                    if z[k] != 0.0 {
                        x.axpy(-lr * z[k] / scale, &mut v[k * features..(k + 1) * features]);
                    }
                    b[k] -= lr * z[k];
                }
                if scale < 1e-9 {
                    v.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
            }
            final_epoch_loss = loss / order.len().max(1) as f64;
        }
        v.iter_mut().for_each(|w| *w *= scale);
        if v.iter().chain(&b).any(|w| !w.is_finite()) {
            return Err(Error::Training("weights diverged to non-finite values".into()));
        }
        let model = Self {
            class_ids,
            features,
            weights: v,
            biases: b,
            feature_space,
            config,
        };
        let heldout_accuracy = (!held_idx.is_empty()).then(|| {
            let correct = held_idx
                .iter()
                .filter(|&&i| model.argmax_index(&rows[i]) == y[i])
                .count();
            correct as f64 / held_idx.len() as f64
        });
        let report = TrainReport {
            train_size: train_idx.len(),
            heldout_size: held_idx.len(),
            heldout_accuracy,
            final_epoch_loss,
        };
        Ok((model, report))
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn feature_space(&self) -> FeatureSpace {
        self.feature_space
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn scores(&self, x: &FeatureRow) -> Vec<f64> {
        (0..self.class_ids.len())
            .map(|k| x.dot(&self.weights[k * self.features..(k + 1) * self.features]) + self.biases[k])
            .collect()
    }

    fn argmax_index(&self, x: &FeatureRow) -> usize {
        let z = self.scores(x);
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        best
    }

    /// Probabilities aligned with [`class_ids`](Self::class_ids).
    pub fn predict_proba_aligned(&self, x: &FeatureRow) -> Result<Vec<f64>> {
        x.check(self.features)?;
        let mut z = self.scores(x);
        softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn predict_proba(&self, x: &FeatureRow) -> Result<ProbVector> {
        let p = self.predict_proba_aligned(x)?;
        Ok(ProbVector(self.class_ids.iter().cloned().zip(p).collect()))
    }

    pub fn predict(&self, x: &FeatureRow) -> Result<&str> {
        x.check(self.features)?;
        Ok(&self.class_ids[self.argmax_index(x)])
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        artifact::write(path, ArtifactKind::Model, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        artifact::read(path, ArtifactKind::Model)
    }

    /// Build a model from explicit parameters (row-major `C × F` weights).
    pub fn from_parameters(
        class_ids: Vec<String>,
        features: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        feature_space: FeatureSpace,
    ) -> Result<Self> {
        let c = class_ids.len();
        if c < 2 || !class_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("class ids must be ≥2, sorted, and unique".into()));
        }
        if weights.len() != c * features || biases.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c * features,
                actual: weights.len(),
            });
        }
        if weights.iter().chain(&biases).any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("classifier parameters"));
        }
        Ok(Self {
            class_ids,
            features,
            weights,
            biases,
            feature_space,
            config: TrainConfig::default(),
        })
    }
}

/// Full-batch objective `mean_i CE_i + (λ/2)|W|²` and its gradient with
/// respect to the weights (row-major) and biases.
pub fn loss_and_gradient(
    model: &LinearClassifier,
    rows: &[FeatureRow],
    labels: &[String],
    l2_penalty: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let y = class_index(&model.class_ids, labels)?;
    let (c, f) = (model.class_ids.len(), model.features);
    let mut gw = vec![0.0; c * f];
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let n = rows.len() as f64;
    for (x, &yi) in rows.iter().zip(&y) {
        x.check(f)?;
        let mut z = model.scores(x);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        loss += (lse - z[yi]) / n;
        softmax_in_place(&mut z);
        z[yi] -= 1.0;
        for k in 0..c {
            x.axpy(z[k] / n, &mut gw[k * f..(k + 1) * f]);
            gb[k] += z[k] / n;
        }
    }
    loss += 0.5 * l2_penalty * model.weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += l2_penalty * w;
    }
    Ok((loss, gw, gb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub total: usize,
    /// Every class that occurs as a true or predicted label.
    pub per_class: BTreeMap<String, ClassMetrics>,
}

pub fn evaluate(model: &LinearClassifier, rows: &[FeatureRow], labels: &[String]) -> Result<EvaluationReport> {
    if rows.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if rows.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    let mut correct = 0;
    for (x, label) in rows.iter().zip(labels) {
        let p = model.predict(x)?;
        *predicted.entry(p).or_default() += 1;
        *support.entry(label.as_str()).or_default() += 1;
        if p == label {
            correct += 1;
            *tp.entry(p).or_default() += 1;
        }
    }
    let classes: BTreeSet<&str> = predicted.keys().chain(support.keys()).copied().collect();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: BTreeMap<String, ClassMetrics> = classes
        .into_iter()
        .map(|k| {
            let t = tp.get(k).copied().unwrap_or(0);
            let s = support.get(k).copied().unwrap_or(0);
            let precision = ratio(t, predicted.get(k).copied().unwrap_or(0));
            let recall = ratio(t, s);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            (
                k.to_string(),
                ClassMetrics {
                    support: s,
                    precision,
                    recall,
                    f1,
                },
            )
        })
        .collect();
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    Ok(EvaluationReport {
        accuracy: correct as f64 / rows.len() as f64,
        macro_f1,
        total: rows.len(),
        per_class,
    })
}
