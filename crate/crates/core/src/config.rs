//! Run configuration, loaded from TOML. The whole configuration is folded
//! into the engine fingerprint, so any change yields a distinct ledger.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{FeatureSpace, TrainConfig};
use crate::embed::{EndpointDescriptor, ReducerConfig, VocabularyConfig};
use crate::error::{Error, Result};
use crate::score::SourceMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Newsgroup20,
    Reuters21578,
    Manifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub kind: CorpusKind,
    pub path: PathBuf,
    /// Documents longer than this many tokens keep only their prefix.
    #[serde(default)]
    pub truncate_tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EmbeddingConfig {
    Internal {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_oversample")]
        oversample: usize,
        #[serde(default = "default_power_iterations")]
        power_iterations: usize,
        #[serde(default = "default_reducer_seed")]
        seed: u64,
    },
    External {
        #[serde(flatten)]
        endpoint: EndpointDescriptor,
        /// Content-hash cache directory; relative paths resolve against the
        /// artifact home.
        #[serde(default)]
        cache_dir: Option<PathBuf>,
    },
}

fn default_k() -> usize {
    ReducerConfig::default().k
}
fn default_oversample() -> usize {
    ReducerConfig::default().oversample
}
fn default_power_iterations() -> usize {
    ReducerConfig::default().power_iterations
}
fn default_reducer_seed() -> u64 {
    ReducerConfig::default().seed
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let r = ReducerConfig::default();
        EmbeddingConfig::Internal {
            k: r.k,
            oversample: r.oversample,
            power_iterations: r.power_iterations,
            seed: r.seed,
        }
    }
}

impl EmbeddingConfig {
    pub fn reducer(&self) -> Option<ReducerConfig> {
        match *self {
            EmbeddingConfig::Internal {
                k,
                oversample,
                power_iterations,
                seed,
            } => Some(ReducerConfig {
                k,
                oversample,
                power_iterations,
                seed,
            }),
            EmbeddingConfig::External { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default = "default_feature_space")]
    pub feature_space: FeatureSpace,
    #[serde(default)]
    pub min_df: Option<u32>,
    #[serde(default)]
    pub max_features: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2_penalty: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
}

fn default_feature_space() -> FeatureSpace {
    FeatureSpace::TfidfSparse
}
fn default_epochs() -> u32 {
    TrainConfig::default().epochs
}
fn default_learning_rate() -> f64 {
    TrainConfig::default().learning_rate
}
fn default_l2() -> f64 {
    TrainConfig::default().l2_penalty
}
fn default_seed() -> u64 {
    TrainConfig::default().seed
}
fn default_holdout() -> f64 {
    TrainConfig::default().holdout_fraction
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            feature_space: default_feature_space(),
            min_df: None,
            max_features: None,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            l2_penalty: t.l2_penalty,
            seed: t.seed,
            holdout_fraction: t.holdout_fraction,
        }
    }
}

impl ClassifierConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            l2_penalty: self.l2_penalty,
            seed: self.seed,
            holdout_fraction: self.holdout_fraction,
        }
    }

    pub fn vocabulary_config(&self) -> VocabularyConfig {
        VocabularyConfig {
            min_df: self.min_df.unwrap_or(1),
            max_features: self.max_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringConfig {
    #[serde(default)]
    pub source_mode: SourceMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            source_mode: SourceMode::Concat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    /// Fraction of revenue reserved for waitlisted providers.
    #[serde(default = "default_pool")]
    pub waitlist_pool_fraction: f64,
    #[serde(default = "default_alpha")]
    pub blend_alpha: f64,
}

fn default_pool() -> f64 {
    0.05
}
fn default_alpha() -> f64 {
    0.5
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            waitlist_pool_fraction: default_pool(),
            blend_alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub allocation: AllocationConfig,
}

impl RunConfig {
    pub fn new(corpus: CorpusConfig) -> Self {
        Self {
            corpus,
            embedding: EmbeddingConfig::default(),
            classifier: ClassifierConfig::default(),
            scoring: ScoringConfig::default(),
            allocation: AllocationConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Read a TOML file; a relative corpus path resolves against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        if c.corpus.path.is_relative() {
            if let Some(dir) = path.parent() {
                c.corpus.path = dir.join(&c.corpus.path);
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.allocation;
        if !(0.0..=1.0).contains(&a.waitlist_pool_fraction) {
            return Err(Error::InvalidArgument("waitlist_pool_fraction must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&a.blend_alpha) {
            return Err(Error::InvalidArgument("blend_alpha must be in [0, 1]".into()));
        }
        if let Some(0) = self.corpus.truncate_tokens {
            return Err(Error::InvalidArgument("truncate_tokens must be at least 1".into()));
        }
        if let EmbeddingConfig::Internal { k: 0, .. } = self.embedding {
            return Err(Error::InvalidArgument("embedding k must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical byte form used in fingerprints. Paths are excluded so that
    /// moving a corpus does not change the fingerprint.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        let mut c = self.clone();
        c.corpus.path = PathBuf::new();
        if let EmbeddingConfig::External { cache_dir, .. } = &mut c.embedding {
            *cache_dir = None;
        }
        Ok(serde_json::to_vec(&c)?)
    }
}
