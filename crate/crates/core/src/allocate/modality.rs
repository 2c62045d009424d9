use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SIMPLEX_TOLERANCE;
use crate::error::{Error, Result};

/// One modality's normalized class shares and its blend weight. Without a
/// `provider_map`, class ids are taken as provider ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub modality: String,
    pub weight: f64,
    pub shares: BTreeMap<String, f64>,
    #[serde(default)]
    pub provider_map: Option<BTreeMap<String, String>>,
}

/// Provider share `Σ_m w_m · share_{m,provider}`; providers absent from a
/// modality contribute zero there.
pub fn combine_modalities(reports: &[ModalityReport]) -> Result<BTreeMap<String, f64>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no modalities to combine".into()));
    }
    let weight_sum: f64 = reports.iter().map(|r| r.weight).sum();
    if reports.iter().any(|r| !r.weight.is_finite() || r.weight < 0.0) || (weight_sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotNormalized(format!("modality weights sum to {weight_sum}")));
    }
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for r in reports {
        let sum: f64 = r.shares.values().sum();
        if r.shares.values().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotNormalized(format!("modality `{}` shares sum to {sum}", r.modality)));
        }
        for (class_id, share) in &r.shares {
            let provider = match &r.provider_map {
                None => class_id,
                Some(map) => map.get(class_id).ok_or_else(|| Error::UnmappedProvider {
                    modality: r.modality.clone(),
                    class_id: class_id.clone(),
                })?,
            };
            *out.entry(provider.clone()).or_insert(0.0) += r.weight * share;
        }
    }
    Ok(out)
}
