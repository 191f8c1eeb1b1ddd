//! Corpus ingestion: cleaning, deduplication, anonymization.
//!
//! Raw documents come in as JSON lines, run through the fixed cleaning
//! pass order (artifact removal, merged-word correction, OCR-duplication
//! removal, rule-based filtering, email anonymization), and come out as
//! [`CleanDocument`]s plus a [`DedupReport`] covering exact and
//! near-duplicate detection.

mod clean;
mod dedup;
mod minhash;

pub use clean::{
    anonymize_emails, clean_document, correct_merged_words, email_pattern,
    remove_extraction_artifacts, remove_ocr_duplication, rule_based_filter, CleanConfig,
    RemovedSpan,
};
pub use dedup::exact_dedup;
pub use minhash::{
    estimated_jaccard, minhash_near_dup, paragraph_segments, shingle_hashes, MinHashConfig,
    MinHasher,
};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {0}: document id must be non-empty")]
    EmptyId(usize),
    #[error("num_perms ({num_perms}) must be divisible by lsh_bands ({lsh_bands})")]
    BandMismatch { num_perms: usize, lsh_bands: usize },
    #[error("invalid tag pattern {pattern:?}: {source}")]
    BadPattern {
        pattern: String,
        source: regex::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FormatHint {
    HtmlExtracted,
    PdfExtracted,
    #[default]
    Plain,
}

/// An ingested document before cleaning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub format_hint: FormatHint,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// One applied cleaning pass and how many edits it made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningLogEntry {
    pub pass: String,
    pub edits: usize,
}

/// A cleaned document ready for chunking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanDocument {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub cleaning_log: Vec<CleaningLogEntry>,
}

/// Reference to a byte span of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

/// A group of byte-identical documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactGroup {
    pub digest: String,
    /// Sorted; the first id is the kept representative.
    pub ids: Vec<String>,
    pub kept: String,
}

/// A candidate near-duplicate pair with its MinHash-estimated Jaccard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearDupPair {
    pub a: SpanRef,
    pub b: SpanRef,
    pub estimated_jaccard: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DedupReport {
    /// Digest algorithm used for exact grouping.
    pub algorithm: String,
    pub exact_duplicate_groups: Vec<ExactGroup>,
    pub near_duplicate_pairs: Vec<NearDupPair>,
}

/// Read a JSONL corpus, one document object per line.
pub fn read_raw_jsonl(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let mut docs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            line: i + 1,
            source,
        })?;
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId(i + 1));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_clean_jsonl(path: &Path, docs: &[CleanDocument]) -> Result<(), CorpusError> {
    let mut out = std::fs::File::create(path)?;
    for doc in docs {
        let line = serde_json::to_string(doc).expect("clean document serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_clean_jsonl(path: &Path) -> Result<Vec<CleanDocument>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let mut docs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(
            serde_json::from_str(&line).map_err(|source| CorpusError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(docs)
}
