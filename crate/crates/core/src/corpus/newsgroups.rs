use std::fs;
use std::path::{Path, PathBuf};

use super::{Corpus, Document, Split};
use crate::embed::tokenize;
use crate::error::{Error, Result};

pub const NEWSGROUP_COUNT: usize = 20;

fn ingestion(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Resolve `root` to the directory holding one subdirectory per newsgroup.
/// Accepts either the parent of `20news-bydate-{train,test}` or the split
/// directory itself.
fn split_dir(root: &Path, split: Split) -> Result<PathBuf> {
    if !root.is_dir() {
        return Err(ingestion(root, "directory does not exist"));
    }
    let nested = root.join(format!("20news-bydate-{split}"));
    if nested.is_dir() {
        return Ok(nested);
    }
    Ok(root.to_path_buf())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| ingestion(dir, e.to_string()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| ingestion(dir, e.to_string()))?;
    entries.sort_by(|a, b| {
        let key = |p: &PathBuf| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            (name.parse::<u64>().unwrap_or(u64::MAX), name)
        };
        key(a).cmp(&key(b))
    });
    Ok(entries)
}

/// Load one split of the by-date 20 Newsgroups distribution. Each newsgroup
/// is its own provider and class.
pub fn load_newsgroup20(root: &Path, split: Split) -> Result<Corpus> {
    let dir = split_dir(root, split)?;
    let groups: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| p.is_dir()).collect();
    if groups.is_empty() {
        return Err(ingestion(&dir, "no newsgroup directories"));
    }
    if groups.len() != NEWSGROUP_COUNT {
        return Err(ingestion(
            &dir,
            format!("expected {NEWSGROUP_COUNT} newsgroup directories, found {}", groups.len()),
        ));
    }
    let mut docs = Vec::new();
    for group_dir in groups {
        let group = group_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for file in sorted_entries(&group_dir)? {
            if !file.is_file() {
                continue;
            }
            let bytes = fs::read(&file).map_err(|e| ingestion(&file, e.to_string()))?;
            let (body, decode_flagged) = match String::from_utf8(bytes) {
                Ok(s) => (s, false),
                Err(e) => (String::from_utf8_lossy(e.as_bytes()).into_owned(), true),
            };
            if body.is_empty() {
                continue;
            }
            let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push(Document {
                doc_id: format!("{group}/{name}"),
                provider_id: group.clone(),
                class_id: group.clone(),
                token_count: tokenize::token_count(&body),
                body,
                precomputed_vector: None,
                decode_flagged,
            });
        }
    }
    Corpus::new(docs, split)
}
