//! Versioned binary artifacts: `b"ENGA"`, a four-byte kind tag, a
//! little-endian `u32` format version, then a bincode payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ENGA";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Embedding,
    Model,
    Centroids,
}

impl ArtifactKind {
    fn tag(self) -> &'static [u8; 4] {
        match self {
            ArtifactKind::Embedding => b"EMBD",
            ArtifactKind::Model => b"MODL",
            ArtifactKind::Centroids => b"CNTR",
        }
    }
}

pub fn encode<T: Serialize>(kind: ArtifactKind, value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(kind.tag());
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bincode::serialize_into(&mut buf, value).map_err(|e| Error::Artifact(e.to_string()))?;
    Ok(buf)
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8], kind: ArtifactKind) -> Result<T> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Artifact("not an engagement artifact".into()));
    }
    if &bytes[4..8] != kind.tag() {
        return Err(Error::Artifact(format!(
            "expected {} artifact, found {}",
            String::from_utf8_lossy(kind.tag()),
            String::from_utf8_lossy(&bytes[4..8])
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    bincode::deserialize(&bytes[12..]).map_err(|e| Error::Artifact(e.to_string()))
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes atomically; returns the SHA-256 of the written bytes.
pub fn write<T: Serialize>(path: &Path, kind: ArtifactKind, value: &T) -> Result<String> {
    let bytes = encode(kind, value)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(digest(&bytes))
}

pub fn read<T: DeserializeOwned>(path: &Path, kind: ArtifactKind) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    decode(&bytes, kind)
}
