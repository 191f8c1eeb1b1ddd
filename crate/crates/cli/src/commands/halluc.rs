//! `halluc-check`: run the hallucination pipeline on one Q/A pair.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;

use grounded_core::hallucination::HallucinationPipeline;
use grounded_core::retrieval::{KbRegistry, RetrievalPipeline};

#[derive(Debug, Args)]
pub struct HallucArgs {
    #[arg(long)]
    pub question: String,
    /// The answer under check.
    #[arg(long)]
    pub answer: String,
    /// Comma-separated KB ids; defaults to every KB in the config.
    #[arg(long, value_delimiter = ',')]
    pub kbs: Vec<String>,
    /// Trace JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: HallucArgs) -> Result<()> {
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
    let retrieval = Arc::new(RetrievalPipeline::new(
        registry,
        gateway,
        assets,
        retrieval_config,
    ));

    // Prior evidence: what the pipeline would have answered from.
    let pool = retrieval.retrieve(&args.question)?;
    let (selected, _) =
        retrieval.rerank_and_select(&args.question, pool, retrieval.config.k);
    let evidence: Vec<String> = selected.iter().map(|c| c.text.clone()).collect();

    let pipeline = HallucinationPipeline::new(retrieval);
    let trace = pipeline.run(&args.question, &args.answer, &evidence);
    let body = serde_json::to_string_pretty(&trace)?;
    std::fs::write(&args.out, body + "\n")?;
    log::info!(
        "verdict: {:?}, final choice: {:?}",
        trace.verdict.label,
        trace.final_choice
    );
    Ok(())
}
