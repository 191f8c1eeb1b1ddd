//! Binary-quantized vector index.
//!
//! Entries store a full-precision embedding plus a 1-bit-per-dimension
//! code. Candidate search walks the codes by Hamming distance, then the
//! survivors are rescored with full-precision cosine (or dot product)
//! against the query. Metadata filtering is applied before distance
//! ranking so the top-N bound holds per filter, not per corpus.

mod binary;
mod filter;
mod store;
mod vector;

pub use binary::{binarize, BinaryCode, QuantizeError};
pub use filter::{FilterExpr, FilterParseError, Predicate};
pub use store::{
    read_embeddings_jsonl, write_embeddings_jsonl, IndexError, IndexMeta, VectorIndex, INDEX_FILE,
    META_FILE,
};
pub use vector::{cosine_similarity, dot_product, EmbeddingVector, RescoreMetric, Rescored};

use crate::scalar::Real;

/// One indexed chunk: embedding, packed binary code, and filterable metadata.
#[derive(Debug, Clone)]
pub struct IndexEntry<S: Real> {
    pub chunk_id: String,
    pub embedding: EmbeddingVector<S>,
    pub code: BinaryCode,
    pub metadata: std::collections::BTreeMap<String, String>,
    pub kb_id: String,
    /// Chunk text kept alongside so rerankers and generators can quote it.
    pub text: String,
}

/// A Hamming-ranked candidate before rescoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HammingCandidate {
    pub entry_idx: usize,
    pub chunk_id: String,
    pub distance: u32,
}
