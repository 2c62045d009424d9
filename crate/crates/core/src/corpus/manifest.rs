//! Line-delimited JSON corpus manifest: one document per line, carrying
//! either a text `body` or a precomputed `vector`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Document, Split};
use crate::embed::{EmbeddingVector, SourceTag};
use crate::error::{Error, Result};

const DEFAULT_EMBEDDER: &str = "precomputed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub doc_id: String,
    pub provider_id: String,
    pub class_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    /// Name of the embedding space the vector came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
}

impl ManifestRecord {
    fn into_document(self, line: usize) -> Result<Document> {
        let corrupt = |reason: String| Error::CorruptLog { line, reason };
        match (self.body, self.vector) {
            (Some(_), Some(_)) => Err(corrupt("record has both body and vector".into())),
            (None, None) => Err(corrupt("record has neither body nor vector".into())),
            (Some(body), None) => Ok(Document::text(self.doc_id, self.provider_id, self.class_id, body)),
            (None, Some(values)) => {
                let name = self.embedder.unwrap_or_else(|| DEFAULT_EMBEDDER.to_string());
                let v = EmbeddingVector::new(values, SourceTag::External(name))?;
                Ok(Document::vector(self.doc_id, self.provider_id, self.class_id, v))
            }
        }
    }

    fn from_document(d: &Document) -> Self {
        let (vector, embedder) = match &d.precomputed_vector {
            Some(v) => (
                Some(v.values().to_vec()),
                match v.source() {
                    SourceTag::External(name) => Some(name.clone()),
                    SourceTag::Internal => Some("internal".to_string()),
                },
            ),
            None => (None, None),
        };
        Self {
            doc_id: d.doc_id.clone(),
            provider_id: d.provider_id.clone(),
            class_id: d.class_id.clone(),
            body: (!d.body.is_empty()).then(|| d.body.clone()),
            vector,
            embedder,
        }
    }
}

/// Read a manifest. Blank lines are skipped; every vector must share one
/// dimension and one embedding space.
pub fn read_manifest(path: &Path, split: Split) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut docs = Vec::new();
    let mut first_vector: Option<(usize, SourceTag)> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::CorruptLog {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let doc = record.into_document(i + 1)?;
        if let Some(v) = &doc.precomputed_vector {
            match &first_vector {
                None => first_vector = Some((v.dims(), v.source().clone())),
                Some((dims, _)) if *dims != v.dims() => {
                    return Err(Error::DimensionMismatch {
                        expected: *dims,
                        actual: v.dims(),
                    })
                }
                Some((_, source)) if source != v.source() => {
                    return Err(Error::SourceMismatch(source.to_string(), v.source().to_string()))
                }
                Some(_) => {}
            }
        }
        docs.push(doc);
    }
    Corpus::new(docs, split)
}

pub fn write_manifest(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for d in corpus.documents() {
        serde_json::to_writer(&mut out, &ManifestRecord::from_document(d))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
