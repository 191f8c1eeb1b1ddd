//! Index build, persistence, Hamming candidate search and rescoring.
//!
//! On-disk layout per KB directory:
//! - `index.bin`: header (magic, version, scalar id, quantization scheme id,
//!   dim, count), then packed codes, then raw embeddings, little-endian.
//! - `meta.jsonl`: one record per entry in file order with chunk id, kb id,
//!   metadata and chunk text.
//!
//! The index is immutable once built; a rebuild writes fresh files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::binary::{binarize, BinaryCode, QuantizeError};
use super::filter::FilterExpr;
use super::vector::{cosine_similarity, dot_product, EmbeddingVector, RescoreMetric, Rescored};
use super::{HammingCandidate, IndexEntry};
use crate::scalar::Real;

pub const INDEX_FILE: &str = "index.bin";
pub const META_FILE: &str = "meta.jsonl";

const MAGIC: &[u8; 4] = b"GRIX";
const FORMAT_VERSION: u16 = 1;
/// Sign quantization, threshold at 0, >= 0 maps to 1.
const QUANT_SIGN: u8 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("quantization failed for chunk {chunk_id}: {source}")]
    Quantize {
        chunk_id: String,
        source: QuantizeError,
    },
    #[error("dimension mismatch: entry {chunk_id} has dim {got}, index has {expected}")]
    DimensionMismatch {
        chunk_id: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate chunk id {0}")]
    DuplicateChunkId(String),
    #[error("malformed index file: {0}")]
    Format(String),
    #[error("malformed metadata sidecar: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("query dimension {got} does not match index dimension {expected}")]
    QueryDimension { got: usize, expected: usize },
    #[error("top-n requires n >= 1")]
    ZeroN,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaRecord {
    chunk_id: String,
    kb_id: String,
    metadata: BTreeMap<String, String>,
    text: String,
}

/// Header info exposed for inspection and format tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMeta {
    pub version: u16,
    pub scalar_id: u8,
    pub quant_scheme: u8,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug)]
pub struct VectorIndex<S: Real> {
    kb_id: String,
    dim: usize,
    entries: Vec<IndexEntry<S>>,
}

impl<S: Real> VectorIndex<S> {
    /// Build from (chunk_id, embedding, metadata, text) tuples. Codes are
    /// derived from the embeddings, never supplied.
    pub fn build(
        kb_id: &str,
        items: impl IntoIterator<Item = (String, EmbeddingVector<S>, BTreeMap<String, String>, String)>,
    ) -> Result<Self, IndexError> {
        let mut entries = Vec::new();
        let mut dim = None;
        let mut seen = std::collections::HashSet::new();
        for (chunk_id, embedding, metadata, text) in items {
            let expected = *dim.get_or_insert(embedding.dim());
            if embedding.dim() != expected {
                return Err(IndexError::DimensionMismatch {
                    chunk_id,
                    got: embedding.dim(),
                    expected,
                });
            }
            if !seen.insert(chunk_id.clone()) {
                return Err(IndexError::DuplicateChunkId(chunk_id));
            }
            let code = binarize(&embedding).map_err(|source| IndexError::Quantize {
                chunk_id: chunk_id.clone(),
                source,
            })?;
            entries.push(IndexEntry {
                chunk_id,
                embedding,
                code,
                metadata,
                kb_id: kb_id.to_string(),
                text,
            });
        }
        Ok(Self {
            kb_id: kb_id.to_string(),
            dim: dim.unwrap_or(0),
            entries,
        })
    }

    pub fn kb_id(&self) -> &str {
        &self.kb_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, idx: usize) -> &IndexEntry<S> {
        &self.entries[idx]
    }

    pub fn entries(&self) -> &[IndexEntry<S>] {
        &self.entries
    }

    /// N entries passing the filter with smallest Hamming distance to the
    /// query code; ties broken by ascending chunk id.
    pub fn hamming_top_n(
        &self,
        query_code: &BinaryCode,
        filter: &FilterExpr,
        n: usize,
    ) -> Result<Vec<HammingCandidate>, IndexError> {
        if n == 0 {
            return Err(IndexError::ZeroN);
        }
        if !self.entries.is_empty() && query_code.len() != self.dim {
            return Err(IndexError::QueryDimension {
                got: query_code.len(),
                expected: self.dim,
            });
        }
        let mut candidates: Vec<HammingCandidate> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| filter.matches(&e.metadata))
            .map(|(idx, e)| HammingCandidate {
                entry_idx: idx,
                chunk_id: e.chunk_id.clone(),
                distance: e.code.hamming(query_code).expect("uniform dim"),
            })
            .collect();
        candidates.sort_by(|a, b| {
            a.distance
                .cmp(&b.distance)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        candidates.truncate(n);
        Ok(candidates)
    }

    /// Reorder candidates by descending full-precision similarity to the
    /// query. A zero-norm side marks the candidate degenerate with score 0.
    pub fn rescore(
        &self,
        query: &EmbeddingVector<S>,
        candidates: &[HammingCandidate],
        metric: RescoreMetric,
    ) -> Result<Vec<Rescored>, IndexError> {
        if !self.entries.is_empty() && query.dim() != self.dim {
            return Err(IndexError::QueryDimension {
                got: query.dim(),
                expected: self.dim,
            });
        }
        let query_zero = query.values.iter().all(|v| *v == S::zero());
        let mut scored: Vec<Rescored> = candidates
            .iter()
            .map(|c| {
                let entry = &self.entries[c.entry_idx];
                let entry_zero = entry.embedding.values.iter().all(|v| *v == S::zero());
                let degenerate = match metric {
                    RescoreMetric::Cosine => query_zero || entry_zero,
                    RescoreMetric::Dot => false,
                };
                let score = match metric {
                    RescoreMetric::Cosine => cosine_similarity(query, &entry.embedding),
                    RescoreMetric::Dot => dot_product(query, &entry.embedding),
                };
                Rescored {
                    entry_idx: c.entry_idx,
                    chunk_id: c.chunk_id.clone(),
                    score,
                    degenerate,
                }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        Ok(scored)
    }

    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        std::fs::create_dir_all(dir)?;
        let words_per_code = self.dim.div_ceil(64);
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(S::SCALAR_ID);
        buf.push(QUANT_SIGN);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for entry in &self.entries {
            debug_assert_eq!(entry.code.words().len(), words_per_code);
            for w in entry.code.words() {
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        for entry in &self.entries {
            for v in &entry.embedding.values {
                v.write_le(&mut buf);
            }
        }
        // Write-then-rename so concurrent readers never see a torn file.
        let tmp = dir.join(format!("{INDEX_FILE}.tmp"));
        std::fs::write(&tmp, &buf)?;
        std::fs::rename(&tmp, dir.join(INDEX_FILE))?;

        let mut meta = Vec::new();
        for entry in &self.entries {
            let record = MetaRecord {
                chunk_id: entry.chunk_id.clone(),
                kb_id: entry.kb_id.clone(),
                metadata: entry.metadata.clone(),
                text: entry.text.clone(),
            };
            serde_json::to_writer(&mut meta, &record)?;
            meta.push(b'\n');
        }
        let tmp = dir.join(format!("{META_FILE}.tmp"));
        std::fs::write(&tmp, &meta)?;
        std::fs::rename(&tmp, dir.join(META_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let bytes = std::fs::read(dir.join(INDEX_FILE))?;
        let meta = Self::read_header(&bytes)?;
        if meta.scalar_id != S::SCALAR_ID {
            return Err(IndexError::Format(format!(
                "scalar id {} does not match requested scalar id {}",
                meta.scalar_id,
                S::SCALAR_ID
            )));
        }
        let words_per_code = meta.dim.div_ceil(64);
        let codes_len = meta.count * words_per_code * 8;
        let embed_len = meta.count * meta.dim * S::BYTE_WIDTH;
        let expected = 16 + codes_len + embed_len;
        if bytes.len() != expected {
            return Err(IndexError::Format(format!(
                "file length {} does not match header (expected {expected})",
                bytes.len()
            )));
        }

        let mut records = Vec::with_capacity(meta.count);
        let file = std::fs::File::open(dir.join(META_FILE))?;
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<MetaRecord>(&line)?);
        }
        if records.len() != meta.count {
            return Err(IndexError::Format(format!(
                "sidecar has {} records, header says {}",
                records.len(),
                meta.count
            )));
        }

        let mut entries = Vec::with_capacity(meta.count);
        let mut kb_id = None;
        for (i, record) in records.into_iter().enumerate() {
            let code_off = 16 + i * words_per_code * 8;
            let mut words = Vec::with_capacity(words_per_code);
            for w in 0..words_per_code {
                let off = code_off + w * 8;
                words.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            }
            let code = BinaryCode::from_words(words, meta.dim);

            let emb_off = 16 + codes_len + i * meta.dim * S::BYTE_WIDTH;
            let mut values = Vec::with_capacity(meta.dim);
            for d in 0..meta.dim {
                let off = emb_off + d * S::BYTE_WIDTH;
                values.push(S::read_le(&bytes[off..off + S::BYTE_WIDTH]));
            }
            kb_id.get_or_insert_with(|| record.kb_id.clone());
            entries.push(IndexEntry {
                chunk_id: record.chunk_id,
                embedding: EmbeddingVector::new(values),
                code,
                metadata: record.metadata,
                kb_id: record.kb_id,
                text: record.text,
            });
        }
        Ok(Self {
            kb_id: kb_id.unwrap_or_default(),
            dim: meta.dim,
            entries,
        })
    }

    pub fn read_header(bytes: &[u8]) -> Result<IndexMeta, IndexError> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!(
                "unsupported format version {version}"
            )));
        }
        let scalar_id = bytes[6];
        let quant_scheme = bytes[7];
        if quant_scheme != QUANT_SIGN {
            return Err(IndexError::Format(format!(
                "unknown quantization scheme {quant_scheme}"
            )));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        Ok(IndexMeta {
            version,
            scalar_id,
            quant_scheme,
            dim,
            count,
        })
    }

    /// Write a JSON report of a query against this index.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kb_id": self.kb_id,
            "dim": self.dim,
            "count": self.entries.len(),
        })
    }
}

/// Convenience for streaming JSONL of `{chunk_id, vector}` records.
pub fn read_embeddings_jsonl<S: Real>(
    path: &Path,
) -> Result<BTreeMap<String, EmbeddingVector<S>>, IndexError> {
    #[derive(Deserialize)]
    struct Record {
        chunk_id: String,
        vector: Vec<f64>,
    }
    let file = std::fs::File::open(path)?;
    let mut out = BTreeMap::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)?;
        out.insert(record.chunk_id, EmbeddingVector::from_f64_slice(&record.vector));
    }
    Ok(out)
}

/// Write `{chunk_id, vector}` JSONL, the precomputed-embedding interchange
/// format accepted by `index build`.
pub fn write_embeddings_jsonl<S: Real>(
    path: &Path,
    items: &[(String, EmbeddingVector<S>)],
) -> Result<(), IndexError> {
    let mut out = std::fs::File::create(path)?;
    for (chunk_id, vector) in items {
        let record = serde_json::json!({
            "chunk_id": chunk_id,
            "vector": vector.to_f64_vec(),
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}
