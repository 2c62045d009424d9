//! Operational surface over the engagement ledger: the `engagement-ledger`
//! CLI and the HTTP service. Both call the same functions here, so a report
//! over one ledger is identical through either surface.

pub mod cli;
pub mod http;
pub mod wire;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use engagement_core::allocate::{
    allocate_revenue, allocate_with_waitlist, score_item, score_waitlist, Allocation, Basis, ItemScore,
    WaitlistAllocation, WaitlistEntry,
};
use engagement_core::corpus::{Corpus, Document, Split};
use engagement_core::embed::{Embedder, EmbeddingVector};
use engagement_core::engine::Engine;
use engagement_core::score::{normalize, EngagementReport, ScoreLedger};
use engagement_core::Result;

use wire::{ItemInput, WaitlistProvider};

pub const HOME_ENV: &str = "ENGAGEMENT_LEDGER_HOME";
pub const DEFAULT_HOME: &str = ".engagement-ledger";

/// Artifact home: explicit value, else `$ENGAGEMENT_LEDGER_HOME`, else
/// `./.engagement-ledger`.
pub fn resolve_home(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(HOME_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_HOME))
}

pub fn report(ledger: &ScoreLedger) -> Result<EngagementReport> {
    normalize(ledger)
}

pub fn allocation(ledger: &ScoreLedger, total: u64, basis: Basis) -> Result<Allocation> {
    allocate_revenue(total, &report(ledger)?, basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitlistResult {
    pub entries: Vec<WaitlistEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<WaitlistAllocation>,
}

/// Score waitlisted providers against the current shares under `basis`,
/// optionally splitting `total` with the configured side pool.
pub fn waitlist(
    engine: &Engine,
    report: &EngagementReport,
    providers: &Corpus,
    total: Option<u64>,
    basis: Basis,
) -> Result<WaitlistResult> {
    let shares = basis.scores(report)?;
    let rows = engine.waitlist_rows(providers)?;
    let entries = score_waitlist(&shares, &rows)?;
    let allocation = total
        .map(|t| {
            allocate_with_waitlist(
                t,
                report,
                basis,
                &entries,
                engine.config().allocation.waitlist_pool_fraction,
            )
        })
        .transpose()?;
    Ok(WaitlistResult { entries, allocation })
}

/// Text-only waitlist providers as a corpus keyed by provider id.
pub fn waitlist_corpus(providers: &[WaitlistProvider]) -> Result<Corpus> {
    let docs = providers
        .iter()
        .flat_map(|p| {
            p.texts.iter().enumerate().map(move |(i, t)| {
                Document::text(format!("{}/{i}", p.provider_id), &p.provider_id, &p.provider_id, t)
            })
        })
        .collect();
    Corpus::new(docs, Split::Test)
}

pub fn item_score(engine: &Engine, ledger: &ScoreLedger, item: &ItemInput) -> Result<ItemScore> {
    let vector = item
        .vector
        .as_ref()
        .map(|v| EmbeddingVector::new(v.clone(), engine.embedder().source()))
        .transpose()?;
    let profile = engine.item_profile(&item.item_id, item.text.as_deref(), vector.as_ref())?;
    score_item(&profile, ledger.events())
}
