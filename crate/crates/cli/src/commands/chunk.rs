//! `chunk`: split cleaned documents into retrieval chunks.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use grounded_core::chunk::{chunk_document, filter_uninformative, write_chunks_jsonl};
use grounded_core::corpus::read_clean_jsonl;

#[derive(Debug, Args)]
pub struct ChunkArgs {
    /// Input JSONL of cleaned documents.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output JSONL of kept chunks.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub target_words: Option<usize>,
    #[arg(long)]
    pub hard_max_words: Option<usize>,
    /// Optional JSONL of dropped chunks with reason codes.
    #[arg(long)]
    pub dropped: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: ChunkArgs) -> Result<()> {
    let (config, _) = super::load_config(&args.config)?;
    let mut chunk_config = config.chunk.clone();
    if let Some(t) = args.target_words {
        chunk_config.target_words = t;
        if args.hard_max_words.is_none() && chunk_config.hard_max_words < t {
            chunk_config.hard_max_words = t * 5 / 4;
        }
    }
    if let Some(h) = args.hard_max_words {
        chunk_config.hard_max_words = h;
    }

    let docs = read_clean_jsonl(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut all = Vec::new();
    for doc in &docs {
        all.extend(chunk_document(doc, &chunk_config)?);
    }
    let total = all.len();
    let (kept, dropped) = filter_uninformative(all, &config.chunk_filter);
    write_chunks_jsonl(&args.out, &kept)?;
    if let Some(path) = &args.dropped {
        let mut out = String::new();
        for d in &dropped {
            out.push_str(&serde_json::to_string(d)?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
    }
    log::info!(
        "chunked {} documents into {} chunks ({} kept, {} dropped)",
        docs.len(),
        total,
        kept.len(),
        dropped.len()
    );
    Ok(())
}
