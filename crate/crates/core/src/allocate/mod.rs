//! Integer revenue allocation from normalized engagement shares.
//!
//! All amounts are currency minor units. Apportionment is largest-remainder,
//! so the shares of any allocation sum to the requested total exactly.

mod item;
mod modality;
mod waitlist;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use item::{
    multitask_as_single_task, score_item, score_item_multitask, split_item_share, CopyrightShares,
    CopyrightSplit, ItemProfile, ItemScore, LabelPair,
};
pub use modality::{combine_modalities, ModalityReport};
pub use waitlist::{
    allocate_with_waitlist, normalize_similarity_row, score_waitlist, waitlist_similarity_row, WaitlistAllocation,
    WaitlistEntry,
};

use crate::error::{Error, Result};
use crate::score::EngagementReport;

/// Tolerance for "this share vector sums to one".
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "alpha")]
pub enum Basis {
    Probability,
    Similarity,
    /// `α·P_i + (1−α)·S_i`
    Blend(f64),
}

impl Basis {
    /// Parse the CLI/query spelling: `prob`, `sim`, or `blend` (which needs
    /// `alpha`).
    pub fn parse(name: &str, alpha: Option<f64>) -> Result<Self> {
        let basis = match name {
            "prob" | "probability" => Basis::Probability,
            "sim" | "similarity" => Basis::Similarity,
            "blend" => Basis::Blend(
                alpha.ok_or_else(|| Error::InvalidArgument("blend basis requires alpha".into()))?,
            ),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown basis `{other}` (expected prob, sim, or blend)"
                )))
            }
        };
        basis.validate()?;
        Ok(basis)
    }

    fn validate(self) -> Result<()> {
        if let Basis::Blend(a) = self {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidArgument(format!("alpha {a} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Per-class scores under this basis.
    pub fn scores(self, report: &EngagementReport) -> Result<BTreeMap<String, f64>> {
        self.validate()?;
        match self {
            Basis::Probability => Ok(report.probability_shares()),
            Basis::Similarity => report.similarity_shares(),
            Basis::Blend(a) => {
                let s = report.similarity_shares()?;
                Ok(report
                    .probability_shares()
                    .into_iter()
                    .map(|(k, p)| {
                        let v = a * p + (1.0 - a) * s[&k];
                        (k, v)
                    })
                    .collect())
            }
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Probability => f.write_str("prob"),
            Basis::Similarity => f.write_str("sim"),
            Basis::Blend(a) => write!(f, "blend:{a}"),
        }
    }
}

impl FromStr for Basis {
    type Err = Error;

    /// Accepts the display form, including `blend:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("blend", a)) => {
                let alpha = a
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad alpha `{a}`")))?;
                Basis::parse("blend", Some(alpha))
            }
            _ => Basis::parse(s, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub total: u64,
    pub basis: Basis,
    pub scores: BTreeMap<String, f64>,
    pub shares: BTreeMap<String, u64>,
}

fn check_scores(scores: &BTreeMap<String, f64>) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no classes to allocate over".into()));
    }
    let mut sum = 0.0;
    for (k, &v) in scores {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NotNormalized(format!("score of `{k}` is {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(format!("scores sum to {sum}")));
    }
    Ok(sum)
}

/// Largest-remainder apportionment of `total` by `weights` (nonnegative,
/// positive sum). Leftover units go to the largest fractional remainders,
/// ties to the smaller key; an overshoot from rounding is taken back from
/// the smallest remainders.
pub fn apportion(total: u64, weights: &BTreeMap<String, f64>) -> Result<BTreeMap<String, u64>> {
    let sum: f64 = weights.values().sum();
    if weights.values().any(|w| !w.is_finite() || *w < 0.0) || !(sum > 0.0) {
        return Err(Error::NotNormalized("weights must be nonnegative with a positive sum".into()));
    }
    let t = total as f64;
    let mut parts: Vec<(&String, u64, f64)> = weights
        .iter()
        .map(|(k, &w)| {
            let q = (t * (w / sum)).min(t);
            let base = q.floor();
            (k, base as u64, q - base)
        })
        .collect();
    let assigned: u64 = parts.iter().map(|p| p.1).sum();
    if assigned <= total {
        let mut deficit = total - assigned;
        // Stable sort keeps key order among equal remainders.
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.sort_by(|&a, &b| parts[b].2.total_cmp(&parts[a].2));
        let mut i = 0;
        while deficit > 0 {
            let j = order[i % order.len()];
            if weights[parts[j].0] > 0.0 {
                parts[j].1 += 1;
                deficit -= 1;
            }
            i += 1;
        }
    } else {
        let mut excess = assigned - total;
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.sort_by(|&a, &b| parts[a].2.total_cmp(&parts[b].2).then_with(|| b.cmp(&a)));
        let mut i = 0;
        while excess > 0 {
            let j = order[i % order.len()];
            if parts[j].1 > 0 {
                parts[j].1 -= 1;
                excess -= 1;
            }
            i += 1;
        }
    }
    Ok(parts.into_iter().map(|(k, v, _)| (k.clone(), v)).collect())
}

/// `R_i = R_tot × score_i`, rounded so the integer shares sum to `total`.
pub fn allocate_revenue(total: u64, report: &EngagementReport, basis: Basis) -> Result<Allocation> {
    let scores = basis.scores(report)?;
    allocate_scores(total, scores, basis)
}

/// Allocate over already normalized scores.
pub fn allocate_scores(total: u64, scores: BTreeMap<String, f64>, basis: Basis) -> Result<Allocation> {
    check_scores(&scores)?;
    let shares = apportion(total, &scores)?;
    Ok(Allocation {
        total,
        basis,
        scores,
        shares,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Allocation {
    /// CSV export: header, one row per provider in id order, then
    /// `#checksum,sha256:<hex of all preceding bytes>,<score sum>,<amount sum>`.
    pub fn to_csv(&self) -> String {
        let mut body = String::from("provider_id,basis,score,amount_minor_units\n");
        for (k, amount) in &self.shares {
            body.push_str(&format!("{},{},{},{}\n", csv_field(k), self.basis, self.scores[k], amount));
        }
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        let score_sum: f64 = self.scores.values().sum();
        let amount_sum: u64 = self.shares.values().sum();
        body.push_str(&format!("#checksum,sha256:{digest},{score_sum},{amount_sum}\n"));
        body
    }
}

/// Recompute the checksum row of an exported CSV.
pub fn verify_csv(csv: &str) -> bool {
    let Some(idx) = csv.trim_end_matches('\n').rfind('\n') else {
        return false;
    };
    let (body, last) = csv.split_at(idx + 1);
    let mut fields = last.trim_end().split(',');
    let (Some("#checksum"), Some(digest)) = (fields.next(), fields.next()) else {
        return false;
    };
    digest == format!("sha256:{}", hex::encode(Sha256::digest(body.as_bytes())))
}
