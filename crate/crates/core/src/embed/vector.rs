use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which embedding space a vector lives in. Vectors from different spaces
/// are never compared or averaged together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Internal,
    External(String),
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTag::Internal => f.write_str("internal"),
            SourceTag::External(name) => write!(f, "external:{name}"),
        }
    }
}

/// Dense embedding with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    source: SourceTag,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, source: SourceTag) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding must have at least one dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        Ok(Self { values, source })
    }

    pub fn zeros(dims: usize, source: SourceTag) -> Self {
        Self {
            values: vec![0.0; dims.max(1)],
            source,
        }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn source(&self) -> &SourceTag {
        &self.source
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Zero vectors are representable but carry no direction; callers treat
    /// them as flagged.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(dot(&self.values, &other.values))
    }

    pub fn check_compatible(&self, other: &EmbeddingVector) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        if self.source != other.source {
            return Err(Error::SourceMismatch(
                self.source.to_string(),
                other.source.to_string(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity `u·v / (|u||v|)`, clamped into [-1, 1] against rounding.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    u.check_compatible(v)?;
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(&u.values, &v.values) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Characteristic vector of a class: the mean of its unit-normalized
/// document vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCentroid {
    pub class_id: String,
    pub vector: EmbeddingVector,
    /// Number of nonzero vectors that contributed.
    pub count: usize,
    /// Set when the contributions cancel to (numerically) zero.
    pub flagged_zero: bool,
}

/// Norm below which a centroid counts as cancelled.
pub const CENTROID_ZERO_NORM: f64 = 1e-12;

/// `<V_i> = (1/K) Σ_j V_ij / |V_ij|` over the nonzero vectors of one class.
pub fn class_centroid<'a, I>(class_id: &str, vectors: I) -> Result<ClassCentroid>
where
    I: IntoIterator<Item = &'a EmbeddingVector>,
{
    let mut sum: Option<Vec<f64>> = None;
    let mut source: Option<SourceTag> = None;
    let mut count = 0usize;
    for v in vectors {
        let n = v.norm();
        if n == 0.0 {
            continue;
        }
        match (&mut sum, &source) {
            (Some(acc), Some(src)) => {
                if acc.len() != v.dims() {
                    return Err(Error::DimensionMismatch {
                        expected: acc.len(),
                        actual: v.dims(),
                    });
                }
                if src != v.source() {
                    return Err(Error::SourceMismatch(src.to_string(), v.source().to_string()));
                }
                for (a, x) in acc.iter_mut().zip(v.values()) {
                    *a += x / n;
                }
            }
            _ => {
                sum = Some(v.values().iter().map(|x| x / n).collect());
                source = Some(v.source().clone());
            }
        }
        count += 1;
    }
    let (Some(mut acc), Some(source)) = (sum, source) else {
        return Err(Error::ZeroVector);
    };
    let k = count as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    let flagged_zero = norm(&acc) < CENTROID_ZERO_NORM;
    Ok(ClassCentroid {
        class_id: class_id.to_string(),
        vector: EmbeddingVector { values: acc, source },
        count,
        flagged_zero,
    })
}
