//! Provider-partitioned corpora.
//!
//! Every training document belongs to exactly one class; a class is either a
//! single data provider or a declared grouping of providers.

mod manifest;
mod newsgroups;
mod reuters;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use manifest::{read_manifest, write_manifest, ManifestRecord};
pub use newsgroups::{load_newsgroup20, NEWSGROUP_COUNT};
pub use reuters::{count_single_topic, derive_combined_class, load_reuters21578, ReutersCorpora};

use crate::embed::tokenize;
use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub provider_id: String,
    pub class_id: String,
    /// Empty for vector-only documents.
    pub body: String,
    pub precomputed_vector: Option<EmbeddingVector>,
    pub token_count: usize,
    /// The source bytes were not valid UTF-8 and were decoded lossily.
    #[serde(default)]
    pub decode_flagged: bool,
}

impl Document {
    pub fn text(
        doc_id: impl Into<String>,
        provider_id: impl Into<String>,
        class_id: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let body = body.into();
        Self {
            doc_id: doc_id.into(),
            provider_id: provider_id.into(),
            class_id: class_id.into(),
            token_count: tokenize::token_count(&body),
            body,
            precomputed_vector: None,
            decode_flagged: false,
        }
    }

    pub fn vector(
        doc_id: impl Into<String>,
        provider_id: impl Into<String>,
        class_id: impl Into<String>,
        vector: EmbeddingVector,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            provider_id: provider_id.into(),
            class_id: class_id.into(),
            body: String::new(),
            precomputed_vector: Some(vector),
            token_count: 0,
            decode_flagged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderClass {
    pub class_id: String,
    pub provider_ids: Vec<String>,
    pub doc_count: usize,
}

/// An immutable, validated set of documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    classes: Vec<ProviderClass>,
    split: Split,
}

impl Corpus {
    /// Validates the documents and derives the class table (sorted by
    /// class id).
    pub fn new(documents: Vec<Document>, split: Split) -> Result<Self> {
        let mut ids = HashSet::with_capacity(documents.len());
        let mut classes: BTreeMap<&str, (BTreeSet<&str>, usize)> = BTreeMap::new();
        for d in &documents {
            if !ids.insert(d.doc_id.as_str()) {
                return Err(Error::InvalidCorpus(format!("duplicate doc_id `{}`", d.doc_id)));
            }
            if d.class_id.is_empty() {
                return Err(Error::InvalidCorpus(format!("document `{}` has an empty class_id", d.doc_id)));
            }
            if d.body.is_empty() && d.precomputed_vector.is_none() {
                return Err(Error::InvalidCorpus(format!(
                    "document `{}` has neither a body nor a vector",
                    d.doc_id
                )));
            }
            let entry = classes.entry(d.class_id.as_str()).or_default();
            entry.0.insert(d.provider_id.as_str());
            entry.1 += 1;
        }
        let classes = classes
            .into_iter()
            .map(|(class_id, (providers, doc_count))| ProviderClass {
                class_id: class_id.to_string(),
                provider_ids: providers.into_iter().map(str::to_string).collect(),
                doc_count,
            })
            .collect();
        Ok(Self {
            documents,
            classes,
            split,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn classes(&self) -> &[ProviderClass] {
        &self.classes
    }

    pub fn class_ids(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.class_id.as_str()).collect()
    }

    pub fn class(&self, class_id: &str) -> Option<&ProviderClass> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents_in<'a>(&'a self, class_id: &'a str) -> impl Iterator<Item = &'a Document> + 'a {
        self.documents.iter().filter(move |d| d.class_id == class_id)
    }

    /// First document (optionally within one class) whose body contains
    /// `needle`.
    pub fn find_by_substring(&self, class_id: Option<&str>, needle: &str) -> Option<&Document> {
        self.documents
            .iter()
            .filter(|d| class_id.map_or(true, |c| d.class_id == c))
            .find(|d| d.body.contains(needle))
    }

    pub fn max_token_count(&self) -> usize {
        self.documents.iter().map(|d| d.token_count).max().unwrap_or(0)
    }
}

/// Cut every document longer than `target_tokens` down to its first
/// `target_tokens` tokens (the prefix is kept).
pub fn truncate_documents(corpus: &Corpus, target_tokens: usize) -> Result<Corpus> {
    if target_tokens == 0 {
        return Err(Error::InvalidArgument("target_tokens must be at least 1".into()));
    }
    let docs = corpus
        .documents
        .iter()
        .map(|d| {
            if d.token_count <= target_tokens {
                return d.clone();
            }
            let mut out = d.clone();
            if let Some(end) = tokenize::prefix_end(&d.body, target_tokens) {
                out.body.truncate(end);
            }
            out.token_count = tokenize::token_count(&out.body);
            out
        })
        .collect();
    Corpus::new(docs, corpus.split)
}

/// Relabel documents by mapping each provider onto a class.
pub fn partition_by_provider(corpus: &Corpus, mapping: &BTreeMap<String, String>) -> Result<Corpus> {
    let missing: BTreeSet<&str> = corpus
        .documents
        .iter()
        .filter(|d| !mapping.contains_key(&d.provider_id))
        .map(|d| d.provider_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UncoveredProviders(
            missing.into_iter().map(str::to_string).collect(),
        ));
    }
    let docs = corpus
        .documents
        .iter()
        .map(|d| Document {
            class_id: mapping[&d.provider_id].clone(),
            ..d.clone()
        })
        .collect();
    Corpus::new(docs, corpus.split)
}
