//! Sign quantization to packed binary codes and Hamming distance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vector::EmbeddingVector;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum QuantizeError {
    #[error("embedding contains a non-finite value at dimension {0}")]
    NonFinite(usize),
    #[error("code lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Packed 1-bit-per-dimension code. Bit i is 1 iff values[i] >= 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCode {
    words: Vec<u64>,
    len: usize,
}

impl BinaryCode {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            words,
            len: bits.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Hamming distance via XOR + popcount.
    pub fn hamming(&self, other: &Self) -> Result<u32, QuantizeError> {
        if self.len != other.len {
            return Err(QuantizeError::LengthMismatch(self.len, other.len));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum())
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert_eq!(words.len(), len.div_ceil(64));
        Self { words, len }
    }
}

/// Quantize an embedding: bit i = 1 iff values[i] >= 0.
pub fn binarize<S: Real>(v: &EmbeddingVector<S>) -> Result<BinaryCode, QuantizeError> {
    if let Some(bad) = v.values.iter().position(|x| !x.is_finite()) {
        return Err(QuantizeError::NonFinite(bad));
    }
    let bits: Vec<bool> = v.values.iter().map(|x| *x >= S::zero()).collect();
    Ok(BinaryCode::from_bits(&bits))
}
