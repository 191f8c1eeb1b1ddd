//! Exact duplicate grouping by content digest.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{DedupReport, ExactGroup, RawDocument};

/// Group documents whose text bytes are identical. Two documents share a
/// group iff their digests match; only groups of two or more are reported.
/// The lexicographically smallest id in each group is the kept
/// representative.
pub fn exact_dedup(docs: &[RawDocument]) -> DedupReport {
    let mut by_digest: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for doc in docs {
        let digest = hex_digest(doc.text.as_bytes());
        by_digest.entry(digest).or_default().push(doc.id.clone());
    }
    let mut groups: Vec<ExactGroup> = by_digest
        .into_iter()
        .filter(|(_, ids)| ids.len() >= 2)
        .map(|(digest, mut ids)| {
            ids.sort();
            let kept = ids[0].clone();
            ExactGroup { digest, ids, kept }
        })
        .collect();
    groups.sort_by(|a, b| a.kept.cmp(&b.kept));
    DedupReport {
        algorithm: "sha-256".to_string(),
        exact_duplicate_groups: groups,
        near_duplicate_pairs: Vec::new(),
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}
