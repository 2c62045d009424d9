//! A trained scoring engine and the durable ledger session built on it.
//!
//! Artifact home layout:
//!
//! ```text
//! config.toml      run configuration
//! model.bin        classifier (+ TF-IDF vocabulary)
//! embedding.bin    internal embedding pipeline (internal mode only)
//! centroids.bin    class characteristic vectors
//! engine.json      fingerprint and artifact digests
//! events.jsonl     append-only event log
//! snapshot.json    latest ledger snapshot
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocate::{waitlist_similarity_row, ItemProfile};
use crate::artifact::{self, ArtifactKind};
use crate::classify::{evaluate, EvaluationReport, FeatureRow, FeatureSpace, LinearClassifier, ProbVector, TrainReport};
use crate::config::{CorpusKind, EmbeddingConfig, RunConfig};
use crate::corpus::{self, Corpus, Document, Split};
use crate::embed::{
    class_centroid, ClassCentroid, Embedder, EmbeddingCache, EmbeddingVector, ExternalEmbedder, InternalPipeline,
    SourceTag, Vocabulary,
};
use crate::error::{Error, Result};
use crate::score::{CentroidIndex, EventScore, Featurizer, PromptEvent, Scorer, ScoreLedger, SourceMode};
use crate::store::{self, EventLog, Snapshot};

pub const CONFIG_FILE: &str = "config.toml";
pub const MODEL_FILE: &str = "model.bin";
pub const EMBEDDING_FILE: &str = "embedding.bin";
pub const CENTROIDS_FILE: &str = "centroids.bin";
pub const MANIFEST_FILE: &str = "engine.json";
pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// The dense embedding space used for similarity.
pub enum DenseEmbedder {
    Internal(InternalPipeline),
    External(ExternalEmbedder),
}

impl Embedder for DenseEmbedder {
    fn source(&self) -> SourceTag {
        match self {
            DenseEmbedder::Internal(p) => p.source(),
            DenseEmbedder::External(e) => e.source(),
        }
    }

    fn dims(&self) -> usize {
        match self {
            DenseEmbedder::Internal(p) => p.dims(),
            DenseEmbedder::External(e) => e.dims(),
        }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match self {
            DenseEmbedder::Internal(p) => p.embed(text),
            DenseEmbedder::External(e) => e.embed(text),
        }
    }
}

impl Featurizer for DenseEmbedder {
    fn space(&self) -> FeatureSpace {
        FeatureSpace::ReducedDense
    }

    fn features(&self, text: &str) -> Result<FeatureRow> {
        Ok(FeatureRow::from(&self.embed(text)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelArtifact {
    classifier: LinearClassifier,
    vocabulary: Option<Vocabulary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EngineManifest {
    fingerprint: String,
    digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub documents: usize,
    pub classes: usize,
    pub vocabulary_size: Option<usize>,
    pub embedding_dims: usize,
    /// Training documents whose embedding was the zero vector.
    pub zero_vector_documents: usize,
    pub train_report: TrainReport,
    pub fingerprint: String,
}

pub struct Engine {
    config: RunConfig,
    vocabulary: Option<Vocabulary>,
    classifier: LinearClassifier,
    embedder: DenseEmbedder,
    centroids: CentroidIndex,
    fingerprint: String,
    digests: BTreeMap<String, String>,
}

/// Load the training split named by the configuration, truncated if
/// configured.
pub fn load_training_corpus(config: &RunConfig) -> Result<Corpus> {
    let c = &config.corpus;
    let corpus = match c.kind {
        CorpusKind::Newsgroup20 => corpus::load_newsgroup20(&c.path, Split::Train)?,
        CorpusKind::Reuters21578 => corpus::load_reuters21578(&c.path)?.train,
        CorpusKind::Manifest => corpus::read_manifest(&c.path, Split::Train)?,
    };
    match c.truncate_tokens {
        Some(t) => corpus::truncate_documents(&corpus, t),
        None => Ok(corpus),
    }
}

fn external_embedder(config: &RunConfig, home: Option<&Path>) -> Result<Option<ExternalEmbedder>> {
    let EmbeddingConfig::External { endpoint, cache_dir } = &config.embedding else {
        return Ok(None);
    };
    let cache = match (cache_dir, home) {
        (Some(d), Some(h)) if d.is_relative() => EmbeddingCache::on_disk(h.join(d))?,
        (Some(d), _) => EmbeddingCache::on_disk(d.clone())?,
        (None, Some(h)) => EmbeddingCache::on_disk(h.join("embedding-cache"))?,
        (None, None) => EmbeddingCache::in_memory(),
    };
    Ok(Some(ExternalEmbedder::new(endpoint.clone(), cache)))
}

fn fingerprint_of(config: &RunConfig, digests: &BTreeMap<String, String>) -> Result<String> {
    let mut h = Sha256::new();
    h.update(config.canonical_bytes()?);
    for (name, d) in digests {
        h.update(b"\n");
        h.update(name.as_bytes());
        h.update(b"=");
        h.update(d.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn centroids_for(class_ids: &[String], vectors: &[(String, EmbeddingVector)], dims: usize, source: &SourceTag) -> Result<CentroidIndex> {
    let mut by_class: BTreeMap<&str, Vec<&EmbeddingVector>> = class_ids.iter().map(|c| (c.as_str(), Vec::new())).collect();
    for (c, v) in vectors {
        by_class.entry(c.as_str()).or_default().push(v);
    }
    let centroids = by_class
        .into_iter()
        .map(|(c, vs)| match class_centroid(c, vs) {
            Err(Error::ZeroVector) => Ok(ClassCentroid {
                class_id: c.to_string(),
                vector: EmbeddingVector::zeros(dims, source.clone()),
                count: 0,
                flagged_zero: true,
            }),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    CentroidIndex::from_centroids(centroids)
}

impl Engine {
    /// Fit vocabulary, embedding, classifier, and centroids on `corpus`.
    /// `home` only locates the external embedding cache.
    pub fn train(config: RunConfig, corpus: &Corpus, home: Option<&Path>) -> Result<(Self, TrainSummary)> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::InvalidCorpus("training corpus is empty".into()));
        }
        let needs_vocabulary =
            config.classifier.feature_space == FeatureSpace::TfidfSparse || config.embedding.reducer().is_some();
        let vocabulary = if needs_vocabulary {
            Some(Vocabulary::fit(
                corpus.documents().iter().map(|d| d.body.as_str()),
                config.classifier.vocabulary_config(),
            )?)
        } else {
            None
        };
        let embedder = match (config.embedding.reducer(), &vocabulary) {
            (Some(reducer), Some(v)) => DenseEmbedder::Internal(InternalPipeline::fit(
                v.clone(),
                corpus.documents().iter().map(|d| d.body.as_str()),
                reducer,
            )?),
            _ => DenseEmbedder::External(external_embedder(&config, home)?.expect("external mode")),
        };
        let doc_vectors: Vec<(String, EmbeddingVector)> = corpus
            .documents()
            .iter()
            .map(|d| Ok((d.class_id.clone(), document_vector(&embedder, d)?)))
            .collect::<Result<_>>()?;
        let zero_vector_documents = doc_vectors.iter().filter(|(_, v)| v.is_zero()).count();

        let labels: Vec<String> = corpus.documents().iter().map(|d| d.class_id.clone()).collect();
        let (rows, features): (Vec<FeatureRow>, usize) = match (config.classifier.feature_space, &vocabulary) {
            (FeatureSpace::TfidfSparse, Some(v)) => (
                corpus.documents().iter().map(|d| FeatureRow::Sparse(v.transform(&d.body))).collect(),
                v.len(),
            ),
            _ => (doc_vectors.iter().map(|(_, v)| FeatureRow::from(v)).collect(), embedder.dims()),
        };
        let (classifier, train_report) = LinearClassifier::train(
            &rows,
            &labels,
            features,
            config.classifier.feature_space,
            config.classifier.train_config(),
        )?;
        drop(rows);
        let centroids = centroids_for(classifier.class_ids(), &doc_vectors, embedder.dims(), &embedder.source())?;
        let mut engine = Self {
            config,
            vocabulary,
            classifier,
            embedder,
            centroids,
            fingerprint: String::new(),
            digests: BTreeMap::new(),
        };
        engine.digests = engine.artifact_digests()?;
        engine.fingerprint = fingerprint_of(&engine.config, &engine.digests)?;
        let summary = TrainSummary {
            documents: corpus.len(),
            classes: engine.classifier.class_ids().len(),
            vocabulary_size: engine.vocabulary.as_ref().map(Vocabulary::len),
            embedding_dims: engine.embedder.dims(),
            zero_vector_documents,
            train_report,
            fingerprint: engine.fingerprint.clone(),
        };
        Ok((engine, summary))
    }

    fn model_artifact(&self) -> ModelArtifact {
        ModelArtifact {
            classifier: self.classifier.clone(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    fn artifact_digests(&self) -> Result<BTreeMap<String, String>> {
        let mut d = BTreeMap::new();
        d.insert(
            MODEL_FILE.to_string(),
            artifact::digest(&artifact::encode(ArtifactKind::Model, &self.model_artifact())?),
        );
        if let DenseEmbedder::Internal(p) = &self.embedder {
            d.insert(EMBEDDING_FILE.to_string(), artifact::digest(&artifact::encode(ArtifactKind::Embedding, p)?));
        }
        d.insert(
            CENTROIDS_FILE.to_string(),
            artifact::digest(&artifact::encode(ArtifactKind::Centroids, &self.centroids)?),
        );
        Ok(d)
    }

    pub fn save(&self, home: &Path) -> Result<()> {
        fs::create_dir_all(home)?;
        fs::write(home.join(CONFIG_FILE), self.config.to_toml()?)?;
        artifact::write(&home.join(MODEL_FILE), ArtifactKind::Model, &self.model_artifact())?;
        if let DenseEmbedder::Internal(p) = &self.embedder {
            p.save(&home.join(EMBEDDING_FILE))?;
        }
        artifact::write(&home.join(CENTROIDS_FILE), ArtifactKind::Centroids, &self.centroids)?;
        let manifest = EngineManifest {
            fingerprint: self.fingerprint.clone(),
            digests: self.digests.clone(),
        };
        fs::write(home.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    /// Load a saved engine, verifying every artifact against its digest.
    pub fn load(home: &Path) -> Result<Self> {
        let missing = |f: &str| Error::Artifact(format!("{} not found; run `train` first", home.join(f).display()));
        let manifest_text = fs::read_to_string(home.join(MANIFEST_FILE)).map_err(|_| missing(MANIFEST_FILE))?;
        let manifest: EngineManifest = serde_json::from_str(&manifest_text)?;
        let config_text = fs::read_to_string(home.join(CONFIG_FILE)).map_err(|_| missing(CONFIG_FILE))?;
        let config = RunConfig::from_toml(&config_text)?;
        let read = |f: &str| fs::read(home.join(f)).map_err(|_| missing(f));

        let mut digests = BTreeMap::new();
        let model_bytes = read(MODEL_FILE)?;
        digests.insert(MODEL_FILE.to_string(), artifact::digest(&model_bytes));
        let model: ModelArtifact = artifact::decode(&model_bytes, ArtifactKind::Model)?;
        let embedder = match config.embedding.reducer() {
            Some(_) => {
                let bytes = read(EMBEDDING_FILE)?;
                digests.insert(EMBEDDING_FILE.to_string(), artifact::digest(&bytes));
                DenseEmbedder::Internal(artifact::decode(&bytes, ArtifactKind::Embedding)?)
            }
            None => DenseEmbedder::External(external_embedder(&config, Some(home))?.expect("external mode")),
        };
        let centroid_bytes = read(CENTROIDS_FILE)?;
        digests.insert(CENTROIDS_FILE.to_string(), artifact::digest(&centroid_bytes));
        let centroids: CentroidIndex = artifact::decode(&centroid_bytes, ArtifactKind::Centroids)?;

        let fingerprint = fingerprint_of(&config, &digests)?;
        if fingerprint != manifest.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: manifest.fingerprint,
                actual: fingerprint,
            });
        }
        Ok(Self {
            config,
            vocabulary: model.vocabulary,
            classifier: model.classifier,
            embedder,
            centroids,
            fingerprint,
            digests,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn classifier(&self) -> &LinearClassifier {
        &self.classifier
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocabulary.as_ref()
    }

    pub fn embedder(&self) -> &DenseEmbedder {
        &self.embedder
    }

    pub fn centroids(&self) -> &CentroidIndex {
        &self.centroids
    }

    pub fn class_ids(&self) -> &[String] {
        self.classifier.class_ids()
    }

    fn featurizer(&self) -> &dyn Featurizer {
        match (self.classifier.feature_space(), &self.vocabulary) {
            (FeatureSpace::TfidfSparse, Some(v)) => v,
            _ => &self.embedder,
        }
    }

    pub fn scorer(&self, mode: SourceMode) -> Scorer<'_> {
        Scorer {
            model: &self.classifier,
            featurizer: self.featurizer(),
            similarity: Some((&self.centroids, &self.embedder)),
            mode,
        }
    }

    pub fn score(&self, event: &PromptEvent, mode: SourceMode) -> Result<EventScore> {
        self.scorer(mode).score(event)
    }

    pub fn classify_text(&self, text: &str) -> Result<ProbVector> {
        self.classifier.predict_proba(&self.featurizer().features(text)?)
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.embedder.embed(text)
    }

    pub fn new_ledger(&self) -> ScoreLedger {
        ScoreLedger::new(self.fingerprint.clone(), self.class_ids().iter().cloned())
    }

    /// Accuracy and per-class metrics on a labeled corpus.
    pub fn evaluate(&self, corpus: &Corpus) -> Result<EvaluationReport> {
        let f = self.featurizer();
        let rows = corpus
            .documents()
            .iter()
            .map(|d| match (&d.precomputed_vector, f.space()) {
                (Some(v), FeatureSpace::ReducedDense) if d.body.is_empty() => Ok(FeatureRow::from(v)),
                _ => f.features(&d.body),
            })
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<String> = corpus.documents().iter().map(|d| d.class_id.clone()).collect();
        evaluate(&self.classifier, &rows, &labels)
    }

    /// Normalized similarity row of every provider in `corpus` against the
    /// trained classes, keyed by provider id.
    pub fn waitlist_rows(&self, corpus: &Corpus) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
        let mut by_provider: BTreeMap<&str, Vec<EmbeddingVector>> = BTreeMap::new();
        for d in corpus.documents() {
            by_provider
                .entry(d.provider_id.as_str())
                .or_default()
                .push(document_vector(&self.embedder, d)?);
        }
        by_provider
            .into_iter()
            .map(|(p, vs)| Ok((p.to_string(), waitlist_similarity_row(&vs, &self.centroids)?)))
            .collect()
    }

    /// Class profile of one item from its text, or from a precomputed vector
    /// in the engine's dense space.
    pub fn item_profile(&self, item_id: &str, text: Option<&str>, vector: Option<&EmbeddingVector>) -> Result<ItemProfile> {
        let embedded = match (vector, text) {
            (Some(v), _) => v.clone(),
            (None, Some(t)) => self.embed_text(t)?,
            (None, None) => return Err(Error::InvalidArgument(format!("item `{item_id}` has neither text nor vector"))),
        };
        let probs = match (text, self.classifier.feature_space()) {
            (Some(t), _) => self.classify_text(t)?,
            (None, FeatureSpace::ReducedDense) => self.classifier.predict_proba(&FeatureRow::from(&embedded))?,
            (None, FeatureSpace::TfidfSparse) => {
                return Err(Error::InvalidArgument(format!(
                    "item `{item_id}` needs text for a TF-IDF classifier"
                )))
            }
        };
        let sims = self.centroids.similarity(&embedded)?;
        ItemProfile::new(item_id, probs.0, sims.as_ref())
    }
}

/// A document's dense vector: its precomputed vector when present (which
/// must live in the embedder's space), otherwise the embedded body.
pub fn document_vector(embedder: &dyn Embedder, d: &Document) -> Result<EmbeddingVector> {
    match &d.precomputed_vector {
        Some(v) => {
            if v.source() != &embedder.source() {
                return Err(Error::SourceMismatch(embedder.source().to_string(), v.source().to_string()));
            }
            if v.dims() != embedder.dims() {
                return Err(Error::DimensionMismatch {
                    expected: embedder.dims(),
                    actual: v.dims(),
                });
            }
            Ok(v.clone())
        }
        None => embedder.embed(&d.body),
    }
}

/// Move aside a log and snapshot written under another fingerprint, so a
/// retrained engine starts an empty ledger. Returns the archived log path.
pub fn retire_stale_ledger(home: &Path, fingerprint: &str) -> Result<Option<PathBuf>> {
    let log = home.join(LOG_FILE);
    if !log.exists() {
        return Ok(None);
    }
    let header = match store::read_records(&log) {
        Ok((h, _)) => h,
        Err(Error::CorruptLog { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if header.fingerprint == fingerprint {
        return Ok(None);
    }
    let short: String = header.fingerprint.chars().take(12).collect();
    let archived = home.join(format!("events.{short}.jsonl"));
    fs::rename(&log, &archived)?;
    let snap = home.join(SNAPSHOT_FILE);
    if snap.exists() {
        fs::rename(&snap, home.join(format!("snapshot.{short}.json")))?;
    }
    Ok(Some(archived))
}

/// The durable ledger: event log plus in-memory totals.
pub struct Session {
    home: PathBuf,
    log: EventLog,
    ledger: ScoreLedger,
}

impl Session {
    /// Open (or start) the ledger in `home` for `engine`. The newest
    /// snapshot is used when it matches; the log tail is replayed on top.
    pub fn open(home: &Path, engine: &Engine) -> Result<Self> {
        let log = EventLog::open_or_create(&home.join(LOG_FILE), engine.fingerprint())?;
        let records = log.records()?;
        let snap_path = home.join(SNAPSHOT_FILE);
        let base = match Snapshot::load(&snap_path) {
            Ok(s) if s.last_sequence_no <= log.last_sequence() => {
                let l = s.ledger()?;
                (l.fingerprint() == engine.fingerprint()).then_some((l, s.last_sequence_no))
            }
            Ok(_) | Err(Error::Io(_)) => None,
            Err(e) => return Err(e),
        };
        let ledger = match base {
            Some((l, seq)) => store::replay_records(&records, seq + 1, l)?,
            None => store::replay_records(&records, 1, engine.new_ledger())?,
        };
        Ok(Self {
            home: home.to_path_buf(),
            log,
            ledger,
        })
    }

    pub fn ledger(&self) -> &ScoreLedger {
        &self.ledger
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Persist a score computed elsewhere. Returns the stored score and
    /// whether the event was new.
    pub fn commit(&mut self, event: PromptEvent, score: EventScore) -> Result<(EventScore, bool)> {
        if let Some(existing) = self.ledger.event(&event.event_id) {
            return Ok((existing.clone(), false));
        }
        let timestamp = event.timestamp;
        // Validate against the ledger before the record becomes durable.
        let mut probe = self.ledger.clone();
        probe.apply(score.clone(), timestamp)?;
        self.log.append(event, score.clone())?;
        self.ledger = probe;
        Ok((score, true))
    }

    /// Score and persist one event; a repeated event id returns the stored
    /// score.
    pub fn ingest(&mut self, engine: &Engine, event: PromptEvent, mode: SourceMode) -> Result<(EventScore, bool)> {
        self.ledger.check_fingerprint(engine.fingerprint())?;
        if let Some(existing) = self.ledger.event(&event.event_id) {
            return Ok((existing.clone(), false));
        }
        let score = engine.score(&event, mode)?;
        self.commit(event, score)
    }

    pub fn snapshot(&self) -> Result<()> {
        store::snapshot(&self.ledger, self.log.last_sequence(), &self.home.join(SNAPSHOT_FILE))?;
        Ok(())
    }
}
