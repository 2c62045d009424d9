#![allow(dead_code)]

use std::path::{Path, PathBuf};

use engagement_core::corpus::write_manifest;
use engagement_core::sample;
use engagement_service::cli::run_args;

pub const CONFIG: &str = "[corpus]\nkind = \"manifest\"\npath = \"docs.jsonl\"\n\n[embedding]\nmode = \"internal\"\nk = 8\n";

/// Write the sample corpus and a config under `dir`, then train into
/// `dir/home` through the CLI.
pub fn trained_home(dir: &Path) -> PathBuf {
    write_manifest(&dir.join("docs.jsonl"), &sample::space_and_sports()).unwrap();
    std::fs::write(dir.join("run.toml"), CONFIG).unwrap();
    let home = dir.join("home");
    cli(&home, &["train", "--config", dir.join("run.toml").to_str().unwrap()]).unwrap();
    home
}

pub fn cli(home: &Path, args: &[&str]) -> Result<String, engagement_service::cli::CliError> {
    let mut out = Vec::new();
    let mut full = vec!["engagement-ledger", "--home", home.to_str().unwrap()];
    full.extend_from_slice(args);
    run_args(full, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

pub const PROMPTS: &[&str] = &[
    "when is the next rocket launch into orbit",
    "the goalie stopped the puck in overtime",
    "how long should bread dough rise",
    "the telescope found a new galaxy",
    "power play goal in the third period",
    "roast vegetables with rosemary and salt",
];
