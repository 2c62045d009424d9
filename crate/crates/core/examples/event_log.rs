//! Durable ledger: append events to a JSONL log, snapshot, restore, and
//! recover from a torn final write.

use std::fs::OpenOptions;
use std::io::Write;

use chrono::{TimeZone, Utc};

use engagement_core::classify::ProbVector;
use engagement_core::score::{EventScore, PromptEvent, SourceMode};
use engagement_core::store::{self, EventLog};

fn main() -> engagement_core::Result<()> {
    let dir = std::env::temp_dir().join(format!("engagement-log-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let log_path = dir.join("events.jsonl");
    let classes = ["cooking", "hockey", "space"];

    let mut log = EventLog::create(&log_path, "example-fingerprint")?;
    for i in 0..5u32 {
        let p = [0.1, 0.2, 0.7];
        let score = EventScore {
            event_id: format!("e{i}"),
            prob_scores: ProbVector(classes.iter().map(|c| c.to_string()).zip(p).collect()),
            sim_scores: None,
            source_mode: SourceMode::Prompt,
            weight: 1.0,
        };
        let at = Utc.timestamp_opt(1_700_000_000 + i as i64, 0).unwrap();
        log.append(PromptEvent::new(format!("e{i}"), "prompt", at), score)?;
    }
    drop(log);

    let full = store::replay(&log_path, classes)?;
    store::snapshot(&full, 5, &dir.join("snapshot.json"))?;
    let restored = store::restore(&dir.join("snapshot.json"), &log_path)?;
    println!("replayed {} events; snapshot restores equal: {}", full.total_events(), restored == full);

    // A crash mid-append leaves a partial line; reopening drops it.
    OpenOptions::new().append(true).open(&log_path)?.write_all(b"{\"sequence_no\":6,\"ev")?;
    let log = EventLog::open(&log_path)?;
    println!("after torn write: last sequence {}", log.last_sequence());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
