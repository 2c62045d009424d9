//! Embeddings produced by an external service, behind a content-addressed
//! on-disk cache.
//!
//! Wire contract: `POST <url>` with body `{"text": "..."}`, response
//! `{"vector": [f64, ...]}`. The response length must equal the declared
//! dimension of the endpoint.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vector::{EmbeddingVector, SourceTag};
use super::Embedder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDescriptor {
    pub name: String,
    pub url: String,
    pub dims: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_retries() -> u32 {
    3
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_backoff_ms() -> u64 {
    200
}

impl EndpointDescriptor {
    pub fn new(name: impl Into<String>, url: impl Into<String>, dims: usize) -> Self {
        Self {
            name: name.into(),
            url: url.into(),
            dims,
            max_retries: default_retries(),
            timeout_ms: default_timeout_ms(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportError {
    pub retriable: bool,
    pub message: String,
}

/// One round trip to an embedding service.
pub trait EmbeddingTransport: Send + Sync {
    fn fetch(&self, text: &str) -> std::result::Result<Vec<f64>, TransportError>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Serialize, Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// JSON-over-HTTP transport.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(descriptor: &EndpointDescriptor) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(descriptor.timeout_ms))
            .build();
        Self {
            url: descriptor.url.clone(),
            agent,
        }
    }
}

impl EmbeddingTransport for HttpTransport {
    fn fetch(&self, text: &str) -> std::result::Result<Vec<f64>, TransportError> {
        let resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { text })
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => TransportError {
                    retriable: code >= 500 || code == 429,
                    message: format!("HTTP {code}"),
                },
                ureq::Error::Transport(t) => TransportError {
                    retriable: true,
                    message: t.to_string(),
                },
            })?;
        let body: EmbedResponse = resp.into_json().map_err(|e| TransportError {
            retriable: false,
            message: format!("malformed response: {e}"),
        })?;
        Ok(body.vector)
    }
}

/// Content-addressed vector cache. Misses for the same key are serialized so
/// concurrent callers trigger a single fetch.
pub struct EmbeddingCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<String, Arc<Mutex<Option<Vec<f64>>>>>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            slots: Mutex::new(HashMap::new()),
        })
    }

    pub fn key(endpoint: &str, dims: usize, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(endpoint.as_bytes());
        h.update([0]);
        h.update(dims.to_le_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    fn path_for(dir: &Path, key: &str) -> PathBuf {
        dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn read_disk(&self, key: &str) -> Option<Vec<f64>> {
        let dir = self.dir.as_ref()?;
        let bytes = fs::read(Self::path_for(dir, key)).ok()?;
        serde_json::from_slice::<EmbedResponse>(&bytes).ok().map(|r| r.vector)
    }

    fn write_disk(&self, key: &str, vector: &[f64]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = Self::path_for(dir, key);
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{key}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&serde_json::to_vec(&EmbedResponse { vector: vector.to_vec() })?)?;
        f.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn get_or_fetch<F>(&self, key: &str, fetch: F) -> Result<Vec<f64>>
    where
        F: FnOnce() -> Result<Vec<f64>>,
    {
        let slot = {
            let mut slots = self.slots.lock().expect("cache map poisoned");
            slots.entry(key.to_string()).or_default().clone()
        };
        let mut guard = slot.lock().expect("cache slot poisoned");
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        if let Some(v) = self.read_disk(key) {
            *guard = Some(v.clone());
            return Ok(v);
        }
        let v = fetch()?;
        self.write_disk(key, &v)?;
        *guard = Some(v.clone());
        Ok(v)
    }
}

/// Embedder backed by an external endpoint.
pub struct ExternalEmbedder {
    descriptor: EndpointDescriptor,
    transport: Box<dyn EmbeddingTransport>,
    cache: EmbeddingCache,
    calls: AtomicU64,
}

impl ExternalEmbedder {
    pub fn new(descriptor: EndpointDescriptor, cache: EmbeddingCache) -> Self {
        let transport = Box::new(HttpTransport::new(&descriptor));
        Self::with_transport(descriptor, transport, cache)
    }

    pub fn with_transport(
        descriptor: EndpointDescriptor,
        transport: Box<dyn EmbeddingTransport>,
        cache: EmbeddingCache,
    ) -> Self {
        Self {
            descriptor,
            transport,
            cache,
            calls: AtomicU64::new(0),
        }
    }

    pub fn descriptor(&self) -> &EndpointDescriptor {
        &self.descriptor
    }

    /// Number of transport round trips issued so far.
    pub fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn fetch_with_retries(&self, text: &str) -> Result<Vec<f64>> {
        let d = &self.descriptor;
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.transport.fetch(text) {
                Ok(v) => {
                    if v.len() != d.dims {
                        return Err(Error::DimensionMismatch {
                            expected: d.dims,
                            actual: v.len(),
                        });
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite("external embedding"));
                    }
                    return Ok(v);
                }
                Err(e) if e.retriable && attempts <= d.max_retries => {
                    thread::sleep(Duration::from_millis(d.backoff_ms * attempts as u64));
                }
                Err(e) => {
                    return Err(Error::Transport {
                        name: d.name.clone(),
                        attempts,
                        reason: e.message,
                    })
                }
            }
        }
    }

    pub fn external_embed(&self, text: &str) -> Result<EmbeddingVector> {
        let d = &self.descriptor;
        let key = EmbeddingCache::key(&d.name, d.dims, text);
        let v = self.cache.get_or_fetch(&key, || self.fetch_with_retries(text))?;
        if v.len() != d.dims {
            return Err(Error::DimensionMismatch {
                expected: d.dims,
                actual: v.len(),
            });
        }
        EmbeddingVector::new(v, self.source())
    }
}

impl Embedder for ExternalEmbedder {
    fn source(&self) -> SourceTag {
        SourceTag::External(self.descriptor.name.clone())
    }

    fn dims(&self) -> usize {
        self.descriptor.dims
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.external_embed(text)
    }
}
