//! MinHash signatures with LSH banding for near-duplicate detection.
//!
//! Word shingles are hashed with FNV-1a, then each signature component is
//! the minimum of a pairwise-independent permutation `(a*h + b) mod p`
//! over the shingle hashes, with p = 2^61 - 1. The component-equality
//! fraction estimates Jaccard similarity; banding surfaces candidate
//! pairs without all-pairs comparison.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DedupReport, NearDupPair, RawDocument, SpanRef};

const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinHashConfig {
    /// Words per shingle.
    pub shingle_size: usize,
    pub num_perms: usize,
    pub lsh_bands: usize,
    /// Pairs at or above this estimated Jaccard are reported.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for MinHashConfig {
    fn default() -> Self {
        Self {
            shingle_size: 3,
            num_perms: 256,
            lsh_bands: 32,
            threshold: 0.8,
            seed: 0x6d696e68617368,
        }
    }
}

/// Seeded family of permutations shared by all signatures in one run.
#[derive(Debug, Clone)]
pub struct MinHasher {
    perms: Vec<(u64, u64)>,
    rows_per_band: usize,
    bands: usize,
}

impl MinHasher {
    pub fn new(num_perms: usize, lsh_bands: usize, seed: u64) -> Result<Self, CorpusError> {
        if num_perms == 0 || lsh_bands == 0 || !num_perms.is_multiple_of(lsh_bands) {
            return Err(CorpusError::BandMismatch {
                num_perms,
                lsh_bands,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = (0..num_perms)
            .map(|_| {
                (
                    rng.gen_range(1..MERSENNE_61),
                    rng.gen_range(0..MERSENNE_61),
                )
            })
            .collect();
        Ok(Self {
            perms,
            rows_per_band: num_perms / lsh_bands,
            bands: lsh_bands,
        })
    }

    pub fn num_perms(&self) -> usize {
        self.perms.len()
    }

    /// Signature over a shingle-hash set; None when the set is empty.
    pub fn signature(&self, shingles: &HashSet<u64>) -> Option<Vec<u64>> {
        if shingles.is_empty() {
            return None;
        }
        let sig = self
            .perms
            .iter()
            .map(|&(a, b)| {
                shingles
                    .iter()
                    .map(|&h| mod_mersenne(a as u128 * h as u128 + b as u128))
                    .min()
                    .expect("non-empty shingle set")
            })
            .collect();
        Some(sig)
    }

    /// Band keys for LSH bucketing.
    pub fn band_keys(&self, signature: &[u64]) -> Vec<(usize, u64)> {
        (0..self.bands)
            .map(|band| {
                let start = band * self.rows_per_band;
                let slice = &signature[start..start + self.rows_per_band];
                let mut h = 0xcbf29ce484222325u64;
                for v in slice {
                    for byte in v.to_le_bytes() {
                        h ^= byte as u64;
                        h = h.wrapping_mul(0x100000001b3);
                    }
                }
                (band, h)
            })
            .collect()
    }
}

fn mod_mersenne(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let mut r = (x >> 61) + (x & p);
    r = (r >> 61) + (r & p);
    if r >= p {
        r -= p;
    }
    debug_assert!(r < p);
    r as u64
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Word-shingle hash set of a text span. Case-folded so OCR casing noise
/// does not break matches.
pub fn shingle_hashes(text: &str, shingle_size: usize) -> HashSet<u64> {
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect();
    if words.len() < shingle_size || shingle_size == 0 {
        return HashSet::new();
    }
    words
        .windows(shingle_size)
        .map(|w| fnv1a(w.join(" ").as_bytes()))
        .collect()
}

/// Fraction of equal components between two signatures.
pub fn estimated_jaccard(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len(), "signatures must share permutation count");
    let equal = a.iter().zip(b).filter(|(x, y)| x == y).count();
    equal as f64 / a.len() as f64
}

/// Paragraph segments (blank-line separated) with byte ranges. Ranges
/// exclude the terminating newline.
pub fn paragraph_segments(text: &str) -> Vec<(usize, usize)> {
    let mut segments = Vec::new();
    let mut start: Option<usize> = None;
    let mut content_end = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                segments.push((s, content_end));
            }
        } else {
            if start.is_none() {
                start = Some(line_start);
            }
            content_end = line_start + line.trim_end_matches('\n').len();
        }
    }
    if let Some(s) = start {
        segments.push((s, content_end));
    }
    segments
}

/// LSH-banded near-duplicate candidate pairs over paragraph segments of
/// the given documents, annotated with MinHash-estimated Jaccard. Pairs
/// at or above the configured threshold are reported.
pub fn minhash_near_dup(
    docs: &[RawDocument],
    cfg: &MinHashConfig,
) -> Result<DedupReport, CorpusError> {
    let hasher = MinHasher::new(cfg.num_perms, cfg.lsh_bands, cfg.seed)?;

    struct Segment {
        span: SpanRef,
        signature: Vec<u64>,
    }
    let mut segments: Vec<Segment> = Vec::new();
    for doc in docs {
        for (start, end) in paragraph_segments(&doc.text) {
            let shingles = shingle_hashes(&doc.text[start..end], cfg.shingle_size);
            if let Some(signature) = hasher.signature(&shingles) {
                segments.push(Segment {
                    span: SpanRef {
                        doc_id: doc.id.clone(),
                        start,
                        end,
                    },
                    signature,
                });
            }
        }
    }

    let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for (idx, seg) in segments.iter().enumerate() {
        for key in hasher.band_keys(&seg.signature) {
            buckets.entry(key).or_default().push(idx);
        }
    }

    let mut candidate_pairs: HashSet<(usize, usize)> = HashSet::new();
    for members in buckets.values() {
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let (a, b) = (members[i].min(members[j]), members[i].max(members[j]));
                candidate_pairs.insert((a, b));
            }
        }
    }

    let mut pairs: Vec<NearDupPair> = candidate_pairs
        .into_iter()
        .filter_map(|(i, j)| {
            let est = estimated_jaccard(&segments[i].signature, &segments[j].signature);
            (est >= cfg.threshold).then(|| NearDupPair {
                a: segments[i].span.clone(),
                b: segments[j].span.clone(),
                estimated_jaccard: est,
            })
        })
        .collect();
    pairs.sort_by(|x, y| {
        (&x.a.doc_id, x.a.start, &x.b.doc_id, x.b.start).cmp(&(
            &y.a.doc_id,
            y.a.start,
            &y.b.doc_id,
            y.b.start,
        ))
    });

    Ok(DedupReport {
        algorithm: "sha-256".to_string(),
        exact_duplicate_groups: Vec::new(),
        near_duplicate_pairs: pairs,
    })
}
