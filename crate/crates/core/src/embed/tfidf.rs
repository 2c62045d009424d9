use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::tokens;
use crate::error::{Error, Result};

/// Sparse row keyed by feature index. Indices are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_map(map: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = map.into_iter().unzip();
        Self { indices, values }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabularyConfig {
    /// Terms appearing in fewer documents are dropped.
    pub min_df: u32,
    /// Keep only the most frequent terms (by document frequency).
    pub max_features: Option<usize>,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        Self {
            min_df: 1,
            max_features: None,
        }
    }
}

/// Fitted term dictionary. Terms are indexed in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: u32,
    index: HashMap<String, u32>,
    idf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: u32,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.doc_freq, r.n_docs)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            doc_freq: v.doc_freq,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    /// Fit over raw document texts. Empty texts still count toward `n_docs`
    /// only if they produce tokens.
    pub fn fit<'a, I>(texts: I, config: VocabularyConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut df: HashMap<String, u32> = HashMap::new();
        let mut n_docs = 0u32;
        let mut seen: Vec<String> = Vec::new();
        for text in texts {
            seen.clear();
            seen.extend(tokens(text).map(|t| t.text));
            if seen.is_empty() {
                continue;
            }
            n_docs += 1;
            seen.sort_unstable();
            seen.dedup();
            for term in seen.drain(..) {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u32)> = df
            .into_iter()
            .filter(|(_, d)| *d >= config.min_df.max(1))
            .collect();
        if let Some(max) = config.max_features {
            if kept.len() > max {
                kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                kept.truncate(max);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let (terms, doc_freq) = kept.into_iter().unzip();
        Ok(Self::from_parts(terms, doc_freq, n_docs))
    }

    fn from_parts(terms: Vec<String>, doc_freq: Vec<u32>, n_docs: u32) -> Self {
        let mut v = Self {
            terms,
            doc_freq,
            n_docs,
            index: HashMap::new(),
            idf: Vec::new(),
        };
        v.rebuild_index();
        v
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let n = self.n_docs as f64;
        self.idf = self
            .doc_freq
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| i as usize)
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    pub fn document_frequency(&self, term: &str) -> Option<u32> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    /// Smoothed inverse document frequency `ln((1+n)/(1+df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }

    /// TF-IDF weights of `text`, L2-normalized. Out-of-vocabulary terms are
    /// ignored; a text with no known terms yields the empty (zero) map.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for tok in tokens(text) {
            if let Some(&i) = self.index.get(&tok.text) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        for (i, w) in counts.iter_mut() {
            *w *= self.idf[*i as usize];
        }
        let norm = counts.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.values_mut().for_each(|w| *w /= norm);
        }
        SparseVector::from_map(counts)
    }
}
