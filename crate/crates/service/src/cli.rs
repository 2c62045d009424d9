//! The `engagement-ledger` command line.
//!
//! Every failure is reported as one JSON line on stderr. Usage errors and
//! missing artifacts exit with status 2, other failures with 1.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};

use engagement_core::config::{EmbeddingConfig, RunConfig};
use engagement_core::corpus::{read_manifest, Split};
use engagement_core::engine::{load_training_corpus, retire_stale_ledger, Engine, Session, LOG_FILE, SNAPSHOT_FILE};
use engagement_core::score::{render_event_table, SourceMode};
use engagement_core::{store, Error};

use crate::wire::{parse_basis, ErrorBody, EventInput, ItemInput};
use crate::{allocation, item_score, report, resolve_home, waitlist, HOME_ENV};

#[derive(Debug, Parser)]
#[command(name = "engagement-ledger", version, about = "Provider engagement scoring and revenue allocation")]
pub struct Cli {
    /// Artifact directory.
    #[arg(long, global = true, env = HOME_ENV)]
    pub home: Option<PathBuf>,
    /// Run configuration (TOML). Required by `train`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the classifier, embedding, and class centroids; write artifacts.
    Train {
        /// Overrides the classifier and reduction seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the training summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score a JSONL file of prompt events into the ledger.
    Score {
        events: PathBuf,
        #[arg(long)]
        source_mode: Option<SourceMode>,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild the ledger from the full event log and refresh the snapshot.
    Replay {
        #[arg(long)]
        json: bool,
    },
    /// Per-class engagement table.
    Report {
        #[arg(long)]
        json: bool,
    },
    /// Apportion an integer total across classes.
    Allocate {
        #[arg(long)]
        total: u64,
        #[arg(long, default_value = "prob")]
        basis: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Score waitlisted providers given as a manifest corpus.
    Waitlist {
        providers: PathBuf,
        #[arg(long)]
        total: Option<u64>,
        #[arg(long, default_value = "prob")]
        basis: String,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Score one training item against every ledger event.
    ItemScore { item: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long)]
        source_mode: Option<SourceMode>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub body: ErrorBody,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            body: ErrorBody {
                kind: "usage".into(),
                message: message.into(),
            },
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.body }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Artifact(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        };
        Self {
            code,
            body: ErrorBody::from(&e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` and run. Help and version output go to `out` as success.
pub fn run_args<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out),
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            Ok(())
        }
        Err(e) => {
            let text = e.to_string();
            let first: Vec<&str> = text.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            Err(CliError::usage(first.join(" ")))
        }
    }
}

/// CLI events without a timestamp are stamped with the epoch so that
/// reports are reproducible.
fn read_events(path: &Path) -> CliResult<Vec<EventInput>> {
    let f = fs::File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| {
            CliError::from(Error::InvalidArgument(format!("{} line {}: {e}", path.display(), i + 1)))
        })?);
    }
    Ok(events)
}

fn load(home: &Path) -> CliResult<(Engine, Session)> {
    let engine = Engine::load(home)?;
    let session = Session::open(home, &engine)?;
    Ok((engine, session))
}

fn print_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).map_err(Error::from)?)?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let home = resolve_home(cli.home.as_deref());
    match cli.command {
        Command::Train { seed, json } => {
            let path = cli.config.ok_or_else(|| CliError::usage("train requires --config <path>"))?;
            let mut config = RunConfig::load(&path)?;
            if let Some(s) = seed {
                config.classifier.seed = s;
                if let EmbeddingConfig::Internal { seed, .. } = &mut config.embedding {
                    *seed = s;
                }
            }
            let corpus = load_training_corpus(&config)?;
            let (engine, summary) = Engine::train(config, &corpus, Some(&home))?;
            engine.save(&home)?;
            if let Some(archived) = retire_stale_ledger(&home, engine.fingerprint())? {
                eprintln!("previous ledger moved to {}", archived.display());
            }
            if json {
                print_json(out, &summary)?;
            } else {
                writeln!(
                    out,
                    "trained {} documents, {} classes, {} dims; held-out accuracy {}",
                    summary.documents,
                    summary.classes,
                    summary.embedding_dims,
                    summary
                        .train_report
                        .heldout_accuracy
                        .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}")),
                )?;
                writeln!(out, "fingerprint {}", summary.fingerprint)?;
            }
        }
        Command::Score {
            events,
            source_mode,
            json,
        } => {
            let inputs = read_events(&events)?;
            let (engine, mut session) = load(&home)?;
            let mode = source_mode.unwrap_or(engine.config().scoring.source_mode);
            let epoch = DateTime::<Utc>::UNIX_EPOCH;
            for input in inputs {
                let event = input.into_event(epoch)?;
                let id = event.event_id.clone();
                let (score, new) = session.ingest(&engine, event, mode)?;
                if json {
                    writeln!(out, "{}", serde_json::to_string(&score).map_err(Error::from)?)?;
                } else {
                    writeln!(out, "event {id}{}", if new { "" } else { " (already recorded)" })?;
                    write!(out, "{}", render_event_table(&score))?;
                }
            }
            session.snapshot()?;
        }
        Command::Replay { json } => {
            let engine = Engine::load(&home)?;
            let ledger = store::replay(&home.join(LOG_FILE), engine.class_ids().iter().cloned())?;
            ledger.check_fingerprint(engine.fingerprint())?;
            let (_, records) = store::read_records(&home.join(LOG_FILE))?;
            let last = records.last().map_or(0, |r| r.sequence_no);
            store::snapshot(&ledger, last, &home.join(SNAPSHOT_FILE))?;
            let r = report(&ledger)?;
            if json {
                print_json(out, &r)?;
            } else {
                write!(out, "{}", r.render_table())?;
            }
        }
        Command::Report { json } => {
            let (_, session) = load(&home)?;
            let r = report(session.ledger())?;
            if json {
                print_json(out, &r)?;
            } else {
                write!(out, "{}", r.render_table())?;
            }
        }
        Command::Allocate {
            total,
            basis,
            alpha,
            json,
        } => {
            let (engine, session) = load(&home)?;
            let alpha = alpha.or(Some(engine.config().allocation.blend_alpha));
            let a = allocation(session.ledger(), total, parse_basis(Some(&basis), alpha)?)?;
            if json {
                print_json(out, &a)?;
            } else {
                write!(out, "{}", a.to_csv())?;
            }
        }
        Command::Waitlist {
            providers,
            total,
            basis,
            alpha,
        } => {
            let (engine, session) = load(&home)?;
            let alpha = alpha.or(Some(engine.config().allocation.blend_alpha));
            let corpus = read_manifest(&providers, Split::Test)?;
            let result = waitlist(
                &engine,
                &report(session.ledger())?,
                &corpus,
                total,
                parse_basis(Some(&basis), alpha)?,
            )?;
            print_json(out, &result)?;
        }
        Command::ItemScore { item } => {
            let text = fs::read_to_string(&item).map_err(|e| CliError::usage(format!("{}: {e}", item.display())))?;
            let input: ItemInput = serde_json::from_str(&text).map_err(Error::from)?;
            let (engine, session) = load(&home)?;
            print_json(out, &item_score(&engine, session.ledger(), &input)?)?;
        }
        Command::Serve {
            port,
            bind,
            source_mode,
        } => {
            let state = crate::http::AppState::load(&home, source_mode)?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(crate::http::serve(state, SocketAddr::new(bind, port)))?;
        }
    }
    Ok(())
}
