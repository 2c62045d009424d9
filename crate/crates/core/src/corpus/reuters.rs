//! Reuters-21578 SGML distribution, ModApte split.
//!
//! A document is in the training split when `LEWISSPLIT="TRAIN"` and
//! `TOPICS="YES"`, in the test split when `LEWISSPLIT="TEST"` and
//! `TOPICS="YES"`. Multi-topic documents get a combined class
//! (`grain-wheat`); documents without topics are dropped.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Corpus, Document, Split};
use crate::embed::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReutersCorpora {
    pub train: Corpus,
    pub test: Corpus,
    /// Records that could not be parsed.
    pub skipped_malformed: usize,
    /// ModApte records dropped for carrying no topic.
    pub excluded_zero_topic: usize,
}

/// Sort the labels, drop duplicates, and join with `-`.
pub fn derive_combined_class<S: AsRef<str>>(topic_labels: &[S]) -> Result<String> {
    let mut labels: Vec<&str> = topic_labels
        .iter()
        .map(AsRef::as_ref)
        .filter(|l| !l.is_empty())
        .collect();
    if labels.is_empty() {
        return Err(Error::EmptyTopics);
    }
    labels.sort_unstable();
    labels.dedup();
    Ok(labels.join("-"))
}

#[derive(Debug, Default)]
struct Record {
    new_id: String,
    lewis_split: String,
    has_topics: bool,
    topics: Vec<String>,
    text: String,
}

fn attribute(tag: &str, name: &str) -> Option<String> {
    let needle = format!("{name}=\"");
    let start = tag.find(&needle)? + needle.len();
    let end = tag[start..].find('"')? + start;
    Some(tag[start..end].to_string())
}

/// Content of the first `<name ...>...</name>` element inside `s`.
fn element<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<{name}");
    let close = format!("</{name}>");
    let mut from = 0;
    loop {
        let start = s[from..].find(&open)? + from;
        let after = start + open.len();
        // Reject prefixes of longer tag names (e.g. <TEXT vs <TEXTX).
        match s[after..].chars().next() {
            Some('>') | Some(' ') | Some('\t') | Some('\n') | Some('\r') => {}
            _ => {
                from = after;
                continue;
            }
        }
        let body_start = s[after..].find('>')? + after + 1;
        let body_end = s[body_start..].find(&close)? + body_start;
        return Some(&s[body_start..body_end]);
    }
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let Some(semi) = tail.find(';').filter(|&i| i <= 8) else {
            out.push('&');
            rest = &tail[1..];
            continue;
        };
        let entity = &tail[1..semi];
        let decoded = match entity {
            "lt" => Some('<'),
            "gt" => Some('>'),
            "amp" => Some('&'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ => entity
                .strip_prefix('#')
                .and_then(|n| n.parse::<u32>().ok())
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &tail[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn parse_record(raw: &str) -> Option<Record> {
    let tag_end = raw.find('>')?;
    let tag = &raw[..tag_end];
    let new_id = attribute(tag, "NEWID")?;
    let lewis_split = attribute(tag, "LEWISSPLIT")?;
    let has_topics = attribute(tag, "TOPICS")? == "YES";
    let topics = element(raw, "TOPICS")
        .map(|t| {
            let mut out = Vec::new();
            let mut rest = t;
            while let Some(d) = element(rest, "D") {
                out.push(unescape(d.trim()));
                let consumed = rest.find("</D>").map(|i| i + 4).unwrap_or(rest.len());
                rest = &rest[consumed..];
            }
            out
        })
        .unwrap_or_default();
    let text_el = element(raw, "TEXT")?;
    let title = element(text_el, "TITLE").map(unescape);
    let body = element(text_el, "BODY").map(unescape);
    let text = match (title, body) {
        (Some(t), Some(b)) => format!("{}\n{}", t.trim(), b.trim_end()),
        (Some(t), None) => t.trim().to_string(),
        (None, Some(b)) => b.trim_end().to_string(),
        (None, None) => unescape(text_el.trim()),
    };
    Some(Record {
        new_id,
        lewis_split,
        has_topics,
        topics,
        text,
    })
}

fn sgm_files(root: &Path) -> Result<Vec<PathBuf>> {
    let ingestion = |reason: String| Error::Ingestion {
        path: root.to_path_buf(),
        reason,
    };
    if !root.is_dir() {
        return Err(ingestion("directory does not exist".into()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| ingestion(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("sgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ingestion("no .sgm files".into()));
    }
    Ok(files)
}

pub fn load_reuters21578(root: &Path) -> Result<ReutersCorpora> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut skipped_malformed = 0;
    let mut excluded_zero_topic = 0;
    for file in sgm_files(root)? {
        let bytes = fs::read(&file).map_err(|e| Error::Ingestion {
            path: file.clone(),
            reason: e.to_string(),
        })?;
        let (content, lossy) = match String::from_utf8(bytes) {
            Ok(s) => (s, false),
            Err(e) => (String::from_utf8_lossy(e.as_bytes()).into_owned(), true),
        };
        let mut rest = content.as_str();
        while let Some(start) = rest.find("<REUTERS") {
            let after = &rest[start..];
            let Some(end) = after.find("</REUTERS>") else {
                skipped_malformed += 1;
                break;
            };
            let raw = &after[..end];
            rest = &after[end + "</REUTERS>".len()..];
            // A second opening tag inside the span means the first record
            // was never closed.
            if let Some(inner) = raw[1..].find("<REUTERS") {
                skipped_malformed += 1;
                rest = &after[inner + 1..];
                continue;
            }
            let Some(rec) = parse_record(raw) else {
                skipped_malformed += 1;
                continue;
            };
            let split = match rec.lewis_split.as_str() {
                "TRAIN" => Split::Train,
                "TEST" => Split::Test,
                _ => continue,
            };
            if !rec.has_topics {
                continue;
            }
            let Ok(class_id) = derive_combined_class(&rec.topics) else {
                excluded_zero_topic += 1;
                continue;
            };
            let doc = Document {
                doc_id: format!("reuters-{}", rec.new_id),
                provider_id: class_id.clone(),
                class_id,
                token_count: tokenize::token_count(&rec.text),
                body: rec.text,
                precomputed_vector: None,
                decode_flagged: lossy,
            };
            if doc.body.is_empty() {
                skipped_malformed += 1;
                continue;
            }
            match split {
                Split::Train => train.push(doc),
                Split::Test => test.push(doc),
            }
        }
    }
    Ok(ReutersCorpora {
        train: Corpus::new(train, Split::Train)?,
        test: Corpus::new(test, Split::Test)?,
        skipped_malformed,
        excluded_zero_topic,
    })
}

/// Number of test documents whose only topic is `topic`.
pub fn count_single_topic(corpus: &Corpus, topic: &str) -> usize {
    corpus.documents().iter().filter(|d| d.class_id == topic).count()
}
