//! `index build` / `index query`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde_json::json;

use grounded_core::chunk::read_chunks_jsonl;
use grounded_core::index::{
    binarize, read_embeddings_jsonl, EmbeddingVector, FilterExpr, RescoreMetric, VectorIndex,
};

#[derive(Debug, Subcommand)]
pub enum IndexCmd {
    /// Build a KB index from chunks plus embeddings.
    Build(BuildArgs),
    /// Query one KB index with a precomputed embedding.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub chunks: PathBuf,
    /// KB identifier stored in every entry.
    #[arg(long)]
    pub kb: String,
    /// Output directory for index.bin + meta.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed {chunk_id, vector} JSONL; when absent the configured
    /// gateway embeds the chunk texts.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub kb: String,
    /// Index directory; defaults to the config [kbs] entry for --kb.
    #[arg(long)]
    pub index_dir: Option<PathBuf>,
    /// JSON file holding the query embedding: [..] or {"vector": [..]}.
    #[arg(long)]
    pub embedding_file: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value = "")]
    pub filter: String,
    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(cmd: IndexCmd) -> Result<()> {
    match cmd {
        IndexCmd::Build(args) => build(args),
        IndexCmd::Query(args) => query(args),
    }
}

fn build(args: BuildArgs) -> Result<()> {
    let chunks = read_chunks_jsonl(&args.chunks)
        .with_context(|| format!("reading {}", args.chunks.display()))?;

    let embeddings: BTreeMap<String, EmbeddingVector<f32>> = match &args.embeddings {
        Some(path) => read_embeddings_jsonl(path)?,
        None => {
            let (config, base) = super::load_config(&args.config)?;
            let gateway = config.build_gateway(&base)?;
            let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
            let vectors = gateway.embed(&texts)?;
            chunks
                .iter()
                .map(|c| c.chunk_id.clone())
                .zip(vectors)
                .collect()
        }
    };

    let items = chunks.into_iter().map(|chunk| {
        let embedding = embeddings.get(&chunk.chunk_id).cloned().ok_or_else(|| {
            anyhow::anyhow!("no embedding for chunk {}", chunk.chunk_id)
        });
        (chunk, embedding)
    });
    let mut entries = Vec::new();
    for (chunk, embedding) in items {
        let mut metadata = chunk.metadata.clone();
        metadata.insert("doc_id".to_string(), chunk.doc_id.clone());
        if !chunk.section_path.is_empty() {
            metadata.insert("section".to_string(), chunk.section_path.join(" / "));
        }
        entries.push((chunk.chunk_id, embedding?, metadata, chunk.text));
    }
    let index = VectorIndex::<f32>::build(&args.kb, entries)?;
    index.save(&args.out)?;
    log::info!(
        "built kb {:?}: {} entries, dim {} -> {}",
        args.kb,
        index.len(),
        index.dim(),
        args.out.display()
    );
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    let dir = match (&args.index_dir, &args.config) {
        (Some(dir), _) => dir.clone(),
        (None, Some(_)) => {
            let (config, base) = super::load_config(&args.config)?;
            config
                .resolved_kbs(&base)
                .get(&args.kb)
                .cloned()
                .with_context(|| format!("kb {:?} not present in config [kbs]", args.kb))?
        }
        (None, None) => bail!("provide --index-dir or --config with a [kbs] entry"),
    };
    let index = VectorIndex::<f32>::load(&dir)?;

    let raw = std::fs::read_to_string(&args.embedding_file)?;
    let value: serde_json::Value = serde_json::from_str(&raw)?;
    let values: Vec<f64> = match &value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        serde_json::Value::Object(map) => serde_json::from_value(
            map.get("vector")
                .cloned()
                .context("embedding file object needs a \"vector\" field")?,
        )?,
        _ => bail!("embedding file must be an array or {{\"vector\": [..]}}"),
    };
    let embedding = EmbeddingVector::<f32>::from_f64_slice(&values);

    let filter = FilterExpr::parse(&args.filter).map_err(|e| anyhow::anyhow!("{e}"))?;
    let code = binarize(&embedding)?;
    let candidates = index.hamming_top_n(&code, &filter, args.n)?;
    let rescored = index.rescore(&embedding, &candidates, RescoreMetric::Cosine)?;

    let results: Vec<serde_json::Value> = rescored
        .iter()
        .map(|r| {
            json!({
                "chunk_id": r.chunk_id,
                "kb_id": args.kb,
                "cosine": r.score,
                "hamming": index.entries()[r.entry_idx]
                    .code
                    .hamming(&code)
                    .expect("uniform dim"),
            })
        })
        .collect();
    let body = serde_json::to_string_pretty(&json!({
        "v": 1,
        "kb": args.kb,
        "n": args.n,
        "results": results,
    }))?;
    match &args.out {
        Some(path) => std::fs::write(path, body + "\n")?,
        None => println!("{body}"),
    }
    Ok(())
}
