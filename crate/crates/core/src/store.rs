//! Append-only event log and ledger snapshots.
//!
//! The log is UTF-8 JSON lines. Line 1 is the header
//! `{"format_version":1,"fingerprint":"…"}`; every further line is one
//! [`EventLogRecord`] with a gap-free `sequence_no` starting at 1. A line is
//! committed once its trailing newline is on disk; anything after the last
//! newline is a torn write and is cut off on open.

use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{ClassTotals, EventScore, PromptEvent, ScoreLedger};

pub const LOG_FORMAT_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format_version: u32,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub sequence_no: u64,
    pub event: PromptEvent,
    pub event_score: EventScore,
    pub fingerprint: String,
}

/// Single-writer handle on a log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    header: LogHeader,
    next_sequence: u64,
    len: u64,
}

struct Scan {
    header: Option<LogHeader>,
    records: Vec<EventLogRecord>,
    /// Byte length of the committed prefix.
    valid_len: u64,
}

fn corrupt(line: usize, reason: impl Into<String>) -> Error {
    Error::CorruptLog {
        line,
        reason: reason.into(),
    }
}

/// Parse the committed lines of `path`. A torn final line (no newline, or
/// unparseable final line) ends the scan; a bad line followed by more
/// lines is corruption.
fn scan(path: &Path) -> Result<Scan> {
    let bytes = fs::read(path)?;
    let mut header = None;
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut pos = 0usize;
    let mut line_no = 0usize;
    while pos < bytes.len() {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            break;
        };
        line_no += 1;
        let line = &bytes[pos..pos + nl];
        let is_last = pos + nl + 1 == bytes.len();
        let parsed: Result<()> = (|| {
            let text = std::str::from_utf8(line).map_err(|e| corrupt(line_no, e.to_string()))?;
            if header.is_none() {
                let h: LogHeader = serde_json::from_str(text).map_err(|e| corrupt(line_no, e.to_string()))?;
                if h.format_version != LOG_FORMAT_VERSION {
                    return Err(Error::UnsupportedVersion {
                        found: h.format_version,
                        supported: LOG_FORMAT_VERSION,
                    });
                }
                header = Some(h);
            } else {
                let r: EventLogRecord = serde_json::from_str(text).map_err(|e| corrupt(line_no, e.to_string()))?;
                records.push(r);
            }
            Ok(())
        })();
        match parsed {
            Ok(()) => {}
            Err(e @ Error::UnsupportedVersion { .. }) => return Err(e),
            Err(_) if is_last && header.is_some() => break,
            Err(e) => return Err(e),
        }
        pos += nl + 1;
        valid_len = pos as u64;
    }
    Ok(Scan {
        header,
        records,
        valid_len,
    })
}

fn check_sequence(records: &[EventLogRecord], header: &LogHeader) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.sequence_no != expected {
            return Err(Error::SequenceGap {
                expected,
                found: r.sequence_no,
            });
        }
        if r.fingerprint != header.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: header.fingerprint.clone(),
                actual: r.fingerprint.clone(),
            });
        }
    }
    Ok(())
}

impl EventLog {
    /// Create a new log; fails if `path` already exists.
    pub fn create(path: &Path, fingerprint: &str) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().read(true).write(true).create_new(true).open(path)?;
        Self::write_header(&mut file, fingerprint)?;
        let len = file.metadata()?.len();
        Ok(Self {
            path: path.to_path_buf(),
            file,
            header: LogHeader {
                format_version: LOG_FORMAT_VERSION,
                fingerprint: fingerprint.to_string(),
            },
            next_sequence: 1,
            len,
        })
    }

    fn write_header(file: &mut File, fingerprint: &str) -> Result<()> {
        let header = LogHeader {
            format_version: LOG_FORMAT_VERSION,
            fingerprint: fingerprint.to_string(),
        };
        let mut line = serde_json::to_vec(&header)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_all()?;
        Ok(())
    }

    /// Open an existing log, truncating a torn final line.
    pub fn open(path: &Path) -> Result<Self> {
        let scan = scan(path)?;
        let header = scan.header.ok_or_else(|| corrupt(1, "missing or incomplete header"))?;
        check_sequence(&scan.records, &header)?;
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        if file.metadata()?.len() != scan.valid_len {
            file.set_len(scan.valid_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            header,
            next_sequence: scan.records.len() as u64 + 1,
            len: scan.valid_len,
        })
    }

    /// Open `path` if it holds a log for `fingerprint`, or start one when the
    /// file is absent or holds no committed header.
    pub fn open_or_create(path: &Path, fingerprint: &str) -> Result<Self> {
        let fresh = match fs::metadata(path) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => true,
            Err(e) => return Err(e.into()),
            Ok(_) => scan(path)?.header.is_none(),
        };
        if fresh {
            if path.exists() {
                fs::remove_file(path)?;
            }
            return Self::create(path, fingerprint);
        }
        let log = Self::open(path)?;
        if log.header.fingerprint != fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: log.header.fingerprint.clone(),
                actual: fingerprint.to_string(),
            });
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn fingerprint(&self) -> &str {
        &self.header.fingerprint
    }

    /// Sequence number of the last committed record (0 for an empty log).
    pub fn last_sequence(&self) -> u64 {
        self.next_sequence - 1
    }

    /// Durably append a fully formed record. The fingerprint must match and
    /// the sequence number must be the next one.
    pub fn append_record(&mut self, record: &EventLogRecord) -> Result<u64> {
        if record.fingerprint != self.header.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.header.fingerprint.clone(),
                actual: record.fingerprint.clone(),
            });
        }
        if record.sequence_no != self.next_sequence {
            return Err(Error::SequenceGap {
                expected: self.next_sequence,
                found: record.sequence_no,
            });
        }
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let written = self.file.write_all(&line).and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            // Roll back to the committed prefix; a failure here is left for
            // the next open to repair.
            let _ = self.file.set_len(self.len);
            let _ = self.file.seek(SeekFrom::Start(self.len));
            return Err(e.into());
        }
        self.len += line.len() as u64;
        self.next_sequence += 1;
        Ok(record.sequence_no)
    }

    /// Append with the next sequence number and this log's fingerprint.
    pub fn append(&mut self, event: PromptEvent, event_score: EventScore) -> Result<u64> {
        let record = EventLogRecord {
            sequence_no: self.next_sequence,
            event,
            event_score,
            fingerprint: self.header.fingerprint.clone(),
        };
        self.append_record(&record)
    }

    pub fn records(&self) -> Result<Vec<EventLogRecord>> {
        read_records(&self.path).map(|(_, r)| r)
    }

    /// Fold every record with `sequence_no ≥ from_sequence` onto `base`.
    pub fn replay_onto(&self, base: ScoreLedger, from_sequence: u64) -> Result<ScoreLedger> {
        replay_records(&self.records()?, from_sequence, base)
    }
}

/// Read the committed records without modifying the file.
pub fn read_records(path: &Path) -> Result<(LogHeader, Vec<EventLogRecord>)> {
    let scan = scan(path)?;
    let header = scan.header.ok_or_else(|| corrupt(1, "missing or incomplete header"))?;
    check_sequence(&scan.records, &header)?;
    Ok((header, scan.records))
}

/// Sequential fold of `records` (those with `sequence_no ≥ from_sequence`)
/// onto `base`. The folded records must be gap-free; a repeated event id is
/// counted once.
pub fn replay_records(records: &[EventLogRecord], from_sequence: u64, mut base: ScoreLedger) -> Result<ScoreLedger> {
    let mut expected: Option<u64> = None;
    for r in records.iter().filter(|r| r.sequence_no >= from_sequence) {
        if let Some(e) = expected {
            if r.sequence_no != e {
                return Err(Error::SequenceGap {
                    expected: e,
                    found: r.sequence_no,
                });
            }
        } else if from_sequence > 0 && r.sequence_no != from_sequence {
            return Err(Error::SequenceGap {
                expected: from_sequence,
                found: r.sequence_no,
            });
        }
        base.check_fingerprint(&r.fingerprint)?;
        base.apply(r.event_score.clone(), r.event.timestamp)?;
        expected = Some(r.sequence_no + 1);
    }
    Ok(base)
}

/// Replay a whole log file from sequence 1 onto an empty ledger over
/// `class_ids`.
pub fn replay<I, S>(path: &Path, class_ids: I) -> Result<ScoreLedger>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let (header, records) = read_records(path)?;
    replay_records(&records, 1, ScoreLedger::new(header.fingerprint, class_ids))
}

/// A float stored both as its exact bit pattern (authoritative) and as a
/// decimal string for human readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredF64 {
    pub bits: String,
    pub decimal: String,
}

impl StoredF64 {
    pub fn new(v: f64) -> Self {
        Self {
            bits: format!("{:016x}", v.to_bits()),
            decimal: v.to_string(),
        }
    }

    pub fn value(&self) -> Result<f64> {
        u64::from_str_radix(&self.bits, 16)
            .map(f64::from_bits)
            .map_err(|e| Error::Artifact(format!("bad float bits `{}`: {e}", self.bits)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTotals {
    prob_sum: StoredF64,
    sim_sum: StoredF64,
    event_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredLedger {
    fingerprint: String,
    total_events: u64,
    total_weight: StoredF64,
    similarity_events: u64,
    last_timestamp: Option<DateTime<Utc>>,
    classes: std::collections::BTreeMap<String, StoredTotals>,
    events: Vec<EventScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub created_at: DateTime<Utc>,
    pub last_sequence_no: u64,
    ledger: StoredLedger,
}

impl Snapshot {
    pub fn new(ledger: &ScoreLedger, last_sequence_no: u64, created_at: DateTime<Utc>) -> Self {
        Self {
            format_version: SNAPSHOT_FORMAT_VERSION,
            created_at,
            last_sequence_no,
            ledger: StoredLedger {
                fingerprint: ledger.fingerprint.clone(),
                total_events: ledger.total_events,
                total_weight: StoredF64::new(ledger.total_weight),
                similarity_events: ledger.similarity_events,
                last_timestamp: ledger.last_timestamp,
                classes: ledger
                    .totals
                    .iter()
                    .map(|(k, t)| {
                        (
                            k.clone(),
                            StoredTotals {
                                prob_sum: StoredF64::new(t.prob_sum),
                                sim_sum: StoredF64::new(t.sim_sum),
                                event_count: t.event_count,
                            },
                        )
                    })
                    .collect(),
                events: ledger.events.values().cloned().collect(),
            },
        }
    }

    pub fn ledger(&self) -> Result<ScoreLedger> {
        let s = &self.ledger;
        Ok(ScoreLedger {
            fingerprint: s.fingerprint.clone(),
            totals: s
                .classes
                .iter()
                .map(|(k, t)| {
                    Ok((
                        k.clone(),
                        ClassTotals {
                            prob_sum: t.prob_sum.value()?,
                            sim_sum: t.sim_sum.value()?,
                            event_count: t.event_count,
                        },
                    ))
                })
                .collect::<Result<_>>()?,
            total_events: s.total_events,
            total_weight: s.total_weight.value()?,
            similarity_events: s.similarity_events,
            last_timestamp: s.last_timestamp,
            events: s.events.iter().map(|e| (e.event_id.clone(), e.clone())).collect(),
        })
    }

    /// Write atomically as a single JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let probe: serde_json::Value = serde_json::from_str(&text)?;
        let version = probe
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Artifact("snapshot has no format_version".into()))?;
        if version != u64::from(SNAPSHOT_FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion {
                found: version as u32,
                supported: SNAPSHOT_FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_value(probe)?)
    }
}

/// Snapshot `ledger` as of `last_sequence_no` to `path`.
pub fn snapshot(ledger: &ScoreLedger, last_sequence_no: u64, path: &Path) -> Result<Snapshot> {
    let s = Snapshot::new(ledger, last_sequence_no, Utc::now());
    s.save(path)?;
    Ok(s)
}

/// Load a snapshot and replay the log tail after it.
pub fn restore(snapshot_path: &Path, log_path: &Path) -> Result<ScoreLedger> {
    let snap = Snapshot::load(snapshot_path)?;
    let (_, records) = read_records(log_path)?;
    replay_records(&records, snap.last_sequence_no + 1, snap.ledger()?)
}
