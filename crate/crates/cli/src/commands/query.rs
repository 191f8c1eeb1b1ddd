//! `query`: one retrieval-pipeline run (rewrite, retrieve, rerank).

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;

use grounded_core::retrieval::{KbRegistry, RetrievalPipeline};

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Query text.
    #[arg(long)]
    pub q: String,
    /// Comma-separated KB ids; defaults to every KB in the config.
    #[arg(long, value_delimiter = ',')]
    pub kbs: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value = "")]
    pub filter: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: QueryArgs) -> Result<()> {
    let (config, base) = super::load_config(&args.config)?;
    let gateway = config.build_gateway(&base)?;
    let assets = config.prompt_assets(&base)?;
    let registry =
        Arc::new(KbRegistry::load(&config.resolved_kbs(&base)).context("loading kb indexes")?);

    let mut retrieval_config = config.retrieval.clone();
    if !args.kbs.is_empty() {
        retrieval_config.kbs = args.kbs.clone();
    } else if retrieval_config.kbs.is_empty() {
        retrieval_config.kbs = registry.ids().map(String::from).collect();
    }
    if let Some(k) = args.k {
        retrieval_config.k = k;
    }
    retrieval_config.filter = args.filter.clone();

    let pipeline = RetrievalPipeline::new(registry, gateway, assets, retrieval_config);
    let run = pipeline.run(&args.q, "")?;

    let body = serde_json::to_string_pretty(&json!({
        "v": 1,
        "query": args.q,
        "rewritten_query": run.rewritten_query,
        "candidates": run.selected,
        "pool_size": run.pool.len(),
        "warnings": run.warnings,
    }))?;
    match &args.out {
        Some(path) => std::fs::write(path, body + "\n")?,
        None => println!("{body}"),
    }
    Ok(())
}
