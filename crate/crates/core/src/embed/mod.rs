//! Text-to-vector machinery: tokenization, TF-IDF weighting, latent
//! semantic reduction, external embedders, and cosine/centroid primitives.

mod external;
mod reducer;
mod tfidf;
pub mod tokenize;
mod vector;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use external::{
    EmbeddingCache, EmbeddingTransport, EndpointDescriptor, ExternalEmbedder, HttpTransport,
    TransportError,
};
pub use reducer::{fit_reducer, ReducedBasis, ReducerConfig};
pub use tfidf::{SparseVector, Vocabulary, VocabularyConfig};
pub use vector::{class_centroid, cosine, ClassCentroid, EmbeddingVector, SourceTag, CENTROID_ZERO_NORM};

use crate::artifact::{self, ArtifactKind};
use crate::error::Result;

/// Anything that maps text to a vector deterministically.
pub trait Embedder: Send + Sync {
    fn source(&self) -> SourceTag;
    fn dims(&self) -> usize;
    /// Same text always yields the same vector. Texts without signal map to
    /// the zero vector, which callers treat as flagged.
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// The in-house pipeline: TF-IDF followed by the fitted reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalPipeline {
    vocabulary: Vocabulary,
    basis: ReducedBasis,
}

impl InternalPipeline {
    /// Fit the reduction over the TF-IDF rows of `texts` under an existing
    /// vocabulary.
    pub fn fit<'a, I>(vocabulary: Vocabulary, texts: I, config: ReducerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let rows: Vec<SparseVector> = texts.into_iter().map(|t| vocabulary.transform(t)).collect();
        let basis = fit_reducer(&rows, vocabulary.len(), config)?;
        Ok(Self { vocabulary, basis })
    }

    pub fn from_parts(vocabulary: Vocabulary, basis: ReducedBasis) -> Self {
        Self { vocabulary, basis }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    /// Reduce an already weighted row; the zero map stays zero.
    pub fn embed_sparse(&self, row: &SparseVector) -> EmbeddingVector {
        if row.is_empty() {
            return EmbeddingVector::zeros(self.basis.k(), SourceTag::Internal);
        }
        let values = self.basis.project(row);
        EmbeddingVector::new(values, SourceTag::Internal)
            .unwrap_or_else(|_| EmbeddingVector::zeros(self.basis.k(), SourceTag::Internal))
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        artifact::write(path, ArtifactKind::Embedding, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        artifact::read(path, ArtifactKind::Embedding)
    }
}

impl Embedder for InternalPipeline {
    fn source(&self) -> SourceTag {
        SourceTag::Internal
    }

    fn dims(&self) -> usize {
        self.basis.k()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_sparse(&self.vocabulary.transform(text)))
    }
}
