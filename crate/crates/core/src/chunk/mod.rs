//! Structure-preserving document chunking.
//!
//! Splitting runs in two passes: sections that fit the target word count
//! become single chunks; oversize sections are split at paragraph
//! boundaries, then sentence boundaries, greedily packing up to the
//! target. LaTeX math and Markdown tables are protected spans: a split
//! point inside one is moved outside it, so every span lands whole in
//! exactly one chunk.

mod filter;
mod split;
mod structure;

pub use filter::{filter_uninformative, DroppedChunk, FilterConfig};
pub use split::chunk_document;
pub use structure::{detect_structure, DocumentStructure, ProtectedSpan, Section, SpanKind};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChunkError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("target_words must satisfy 0 < target_words <= hard_max_words (got {target}/{hard_max})")]
    BadConfig { target: usize, hard_max: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub target_words: usize,
    pub hard_max_words: usize,
    /// Descend from paragraph to sentence boundaries for oversize
    /// paragraphs. When off, oversize paragraphs fall straight back to
    /// word-boundary splitting.
    pub sentence_fallback: bool,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            target_words: 512,
            hard_max_words: 640,
            sentence_fallback: true,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.target_words == 0 || self.target_words > self.hard_max_words {
            return Err(ChunkError::BadConfig {
                target: self.target_words,
                hard_max: self.hard_max_words,
            });
        }
        Ok(())
    }
}

/// A retrieval unit cut from one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub word_count: usize,
    pub section_path: Vec<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Byte range in the source document (whitespace-trimmed cover).
    pub start: usize,
    pub end: usize,
    /// Set when a lone protected span forced the chunk past hard_max_words.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Maximal runs of non-whitespace characters.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn read_chunks_jsonl(path: &Path) -> Result<Vec<Chunk>, ChunkError> {
    let file = std::fs::File::open(path)?;
    let mut chunks = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        chunks.push(
            serde_json::from_str(&line).map_err(|source| ChunkError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(chunks)
}

pub fn write_chunks_jsonl(path: &Path, chunks: &[Chunk]) -> Result<(), ChunkError> {
    let mut out = std::fs::File::create(path)?;
    for chunk in chunks {
        let line = serde_json::to_string(chunk).expect("chunk serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}
