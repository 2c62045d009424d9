//! Scoring providers whose data is not yet in the trained model.
//!
//! A waitlisted provider `j` inherits engagement through its similarity to
//! each trained class: `W_j = Σ_i P_i S_ij` with `Σ_i S_ij = 1`, so `W_j`
//! always lies between the smallest and largest `P_i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{apportion, check_scores, Allocation, Basis, SIMPLEX_TOLERANCE};
use crate::embed::{class_centroid, EmbeddingVector};
use crate::error::{Error, Result};
use crate::score::{CentroidIndex, EngagementReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitlistEntry {
    pub provider_id: String,
    pub similarity_row: BTreeMap<String, f64>,
    pub score: f64,
}

fn check_simplex(what: &str, row: &BTreeMap<String, f64>) -> Result<()> {
    let mut sum = 0.0;
    for (k, &v) in row {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NotNormalized(format!("{what}: entry `{k}` is {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotNormalized(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

/// Clamp negative entries to zero and rescale to sum to one.
pub fn normalize_similarity_row(raw: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if raw.values().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity row"));
    }
    let total: f64 = raw.values().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::SimilarityUndefined);
    }
    Ok(raw.iter().map(|(k, v)| (k.clone(), v.max(0.0) / total)).collect())
}

/// Normalized similarity of a waitlisted provider to every trained class:
/// the mean pairwise cosine between the provider's documents and each
/// class's documents, which is the dot product of the two centroids.
pub fn waitlist_similarity_row(provider_vectors: &[EmbeddingVector], classes: &CentroidIndex) -> Result<BTreeMap<String, f64>> {
    let provider = class_centroid("waitlist", provider_vectors)?;
    let raw = classes
        .centroids()
        .iter()
        .map(|c| Ok((c.class_id.clone(), provider.vector.dot(&c.vector)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    normalize_similarity_row(&raw)
}

/// `W_j = Σ_i P_i S_ij` for every waitlisted provider. Inputs must already
/// be normalized; nothing is rescaled here.
pub fn score_waitlist(
    shares: &BTreeMap<String, f64>,
    rows: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Vec<WaitlistEntry>> {
    check_simplex("probability shares", shares)?;
    rows.iter()
        .map(|(provider_id, row)| {
            check_simplex(&format!("similarity row of `{provider_id}`"), row)?;
            if row.len() != shares.len() || !row.keys().all(|k| shares.contains_key(k)) {
                return Err(Error::ClassMismatch(format!(
                    "similarity row of `{provider_id}` does not cover the trained classes"
                )));
            }
            let score = shares.iter().map(|(k, p)| p * row[k]).sum();
            Ok(WaitlistEntry {
                provider_id: provider_id.clone(),
                similarity_row: row.clone(),
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitlistAllocation {
    pub trained: Allocation,
    pub waitlist: BTreeMap<String, u64>,
    pub pool: u64,
}

/// Split `total` into a side pool of `floor(total × pool_fraction)` for the
/// waitlist (apportioned by `W_j`) and the remainder for trained classes.
/// Without waitlisted providers the whole total goes to trained classes.
pub fn allocate_with_waitlist(
    total: u64,
    report: &EngagementReport,
    basis: Basis,
    entries: &[WaitlistEntry],
    pool_fraction: f64,
) -> Result<WaitlistAllocation> {
    if !(0.0..=1.0).contains(&pool_fraction) {
        return Err(Error::InvalidArgument(format!("pool fraction {pool_fraction} outside [0, 1]")));
    }
    let weights: BTreeMap<String, f64> = entries.iter().map(|e| (e.provider_id.clone(), e.score)).collect();
    let has_pool = weights.values().any(|&w| w > 0.0);
    let pool = if has_pool {
        ((total as f64) * pool_fraction).floor() as u64
    } else {
        0
    };
    let scores = basis.scores(report)?;
    check_scores(&scores)?;
    let trained_total = total - pool;
    let trained = Allocation {
        total: trained_total,
        basis,
        shares: apportion(trained_total, &scores)?,
        scores,
    };
    let waitlist = if has_pool { apportion(pool, &weights)? } else { BTreeMap::new() };
    Ok(WaitlistAllocation { trained, waitlist, pool })
}
