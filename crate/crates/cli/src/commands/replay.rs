//! `replay`: run a scripted conversation against the configured gateway
//! (normally mocks) and emit per-turn prompt sections with token counts.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use serde::Deserialize;
use serde_json::json;

use grounded_core::conversation::{
    ApproxTokenCounter, ContextChunk, ConversationManager, ConversationState,
};
use grounded_core::gateway::GenerateRequest;

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSONL script: {"query": ..., "answer"?: ..., "chunks"?: [...]}.
    #[arg(long)]
    pub script: PathBuf,
    /// JSONL of per-turn prompt sections.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptTurn {
    query: String,
    /// Scripted answer; when absent the gateway generates one.
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    chunks: Vec<ContextChunk>,
}

pub fn run(args: ReplayArgs) -> Result<()> {
    let (config, base) = super::load_config(&args.config)?;
    let gateway = config.build_gateway(&base)?;
    let assets = config.prompt_assets(&base)?;
    let convo = ConversationManager::new(
        gateway.clone(),
        assets,
        config.budget.clone(),
        Arc::new(ApproxTokenCounter),
    );

    let file = std::fs::File::open(&args.script)
        .with_context(|| format!("reading {}", args.script.display()))?;
    let mut out = std::fs::File::create(&args.out)?;
    let mut state = ConversationState::new("replay");

    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let turn: ScriptTurn = serde_json::from_str(&line)
            .with_context(|| format!("script line {}", i + 1))?;
        let sections = convo.start_turn(&mut state, &turn.query, &turn.chunks);
        let answer = match &turn.answer {
            Some(a) => a.clone(),
            None => {
                let prompt = convo.render_answer_prompt(&sections);
                gateway.generate(&GenerateRequest::new(prompt))?
            }
        };
        let refs = turn.chunks.iter().map(|c| c.chunk_id.clone()).collect();
        convo.complete_turn(&mut state, &turn.query, &answer, refs);
        let record = json!({
            "turn": i + 1,
            "sections": sections,
            "answer": answer,
            "summarizer_calls": state.summarizer_calls,
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}
