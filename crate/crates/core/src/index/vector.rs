//! Full-precision embedding vectors and rescoring.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Fixed-length embedding. All values must be finite before quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector<S: Real> {
    pub values: Vec<S>,
}

impl<S: Real> EmbeddingVector<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Lossless for f32 sources widened to f64; rounds when narrowing.
    pub fn from_f64_slice(values: &[f64]) -> Self {
        Self {
            values: values
                .iter()
                .map(|&v| S::from_f64(v).expect("f64 convertible to scalar"))
                .collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.to_f64().expect("scalar convertible to f64"))
            .collect()
    }
}

/// Similarity used when rescoring Hamming candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RescoreMetric {
    #[default]
    Cosine,
    Dot,
}

/// One rescored candidate with its full-precision similarity attached.
#[derive(Debug, Clone)]
pub struct Rescored {
    pub entry_idx: usize,
    pub chunk_id: String,
    pub score: f64,
    /// Set when a zero-norm vector forced the score to 0.
    pub degenerate: bool,
}

/// Dot product accumulated in f64 regardless of storage width.
pub fn dot_product<S: Real>(a: &EmbeddingVector<S>, b: &EmbeddingVector<S>) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.to_f64().unwrap() * y.to_f64().unwrap())
        .sum()
}

fn norm<S: Real>(v: &EmbeddingVector<S>) -> f64 {
    v.values
        .iter()
        .map(|x| {
            let f = x.to_f64().unwrap();
            f * f
        })
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity; zero-norm input yields 0 by contract.
pub fn cosine_similarity<S: Real>(a: &EmbeddingVector<S>, b: &EmbeddingVector<S>) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot_product(a, b) / (na * nb)
}
