//! Grounded retrieval engine.
//!
//! End-to-end machinery for retrieval-augmented answering over curated
//! knowledge bases: corpus cleaning and deduplication, structure-preserving
//! chunking, binary-quantized vector search with full-precision rescoring,
//! query rewriting and reranking, a hallucination detect/revise/rank
//! pipeline, token-budgeted conversation state, and the evaluation metric
//! suite. All model services sit behind the [`gateway::Gateway`] trait so
//! every path runs deterministically under scripted mocks.

pub mod chunk;
pub mod conversation;
pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod hallucination;
pub mod index;
pub mod retrieval;
pub mod scalar;

pub use scalar::Real;

/// Scalar type used by the serving pipeline. Index storage, search and
/// rescoring are generic over [`Real`]; f32 is the default for served
/// embeddings, f64 is available for exact oracle comparisons.
pub type DefaultScalar = f32;

/// Embedding vector at the serving precision.
pub type Embedding = index::EmbeddingVector<DefaultScalar>;

/// Vector index at the serving precision.
pub type VectorIndex = index::VectorIndex<DefaultScalar>;
