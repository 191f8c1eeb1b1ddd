//! `clean`: run the cleaning passes and dedup over a JSONL corpus.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use grounded_core::corpus::{
    clean_document, exact_dedup, minhash_near_dup, read_raw_jsonl, write_clean_jsonl,
};

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input JSONL corpus, one document object per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output JSONL of cleaned documents.
    #[arg(long)]
    pub out: PathBuf,
    /// Output JSON dedup report.
    #[arg(long)]
    pub report: PathBuf,
    /// Keep exact duplicates in the output instead of dropping all but
    /// the group representative.
    #[arg(long)]
    pub keep_duplicates: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: CleanArgs) -> Result<()> {
    let (config, _) = super::load_config(&args.config)?;
    let docs = read_raw_jsonl(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;

    let mut report = exact_dedup(&docs);
    report.near_duplicate_pairs =
        minhash_near_dup(&docs, &config.minhash)?.near_duplicate_pairs;

    let drop: std::collections::HashSet<&str> = if args.keep_duplicates {
        Default::default()
    } else {
        report
            .exact_duplicate_groups
            .iter()
            .flat_map(|g| g.ids.iter().filter(|id| **id != g.kept))
            .map(|id| id.as_str())
            .collect()
    };
    let cleaned = docs
        .iter()
        .filter(|d| !drop.contains(d.id.as_str()))
        .map(|d| clean_document(d, &config.clean))
        .collect::<Result<Vec<_>, _>>()?;
    write_clean_jsonl(&args.out, &cleaned)?;

    let file = std::fs::File::create(&args.report)?;
    serde_json::to_writer_pretty(file, &report)?;

    log::info!(
        "cleaned {} documents ({} duplicates dropped), {} exact-dup groups, {} near-dup pairs",
        cleaned.len(),
        drop.len(),
        report.exact_duplicate_groups.len(),
        report.near_duplicate_pairs.len()
    );
    Ok(())
}
