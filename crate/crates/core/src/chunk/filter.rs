//! Statistical filtering of uninformative chunks.

use serde::{Deserialize, Serialize};

use super::Chunk;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Drop below this many words ("too-short").
    pub min_words: usize,
    /// Drop when alphabetic chars / non-whitespace chars falls below
    /// this ("low-alpha").
    pub min_alpha_ratio: f64,
    /// Drop when distinct words / total words falls below this
    /// ("low-diversity").
    pub min_distinct_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_words: 20,
            min_alpha_ratio: 0.4,
            min_distinct_ratio: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroppedChunk {
    pub chunk: Chunk,
    pub reason: String,
}

fn drop_reason(chunk: &Chunk, cfg: &FilterConfig) -> Option<&'static str> {
    if chunk.word_count < cfg.min_words {
        return Some("too-short");
    }
    let non_ws: Vec<char> = chunk.text.chars().filter(|c| !c.is_whitespace()).collect();
    if !non_ws.is_empty() {
        let alpha = non_ws.iter().filter(|c| c.is_alphabetic()).count();
        if (alpha as f64) / (non_ws.len() as f64) < cfg.min_alpha_ratio {
            return Some("low-alpha");
        }
    }
    let words: Vec<&str> = chunk.text.split_whitespace().collect();
    if !words.is_empty() {
        let distinct: std::collections::HashSet<&str> = words.iter().copied().collect();
        if (distinct.len() as f64) / (words.len() as f64) < cfg.min_distinct_ratio {
            return Some("low-diversity");
        }
    }
    None
}

/// Partition chunks into kept and dropped-with-reason.
pub fn filter_uninformative(
    chunks: Vec<Chunk>,
    cfg: &FilterConfig,
) -> (Vec<Chunk>, Vec<DroppedChunk>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for chunk in chunks {
        match drop_reason(&chunk, cfg) {
            None => kept.push(chunk),
            Some(reason) => dropped.push(DroppedChunk {
                chunk,
                reason: reason.to_string(),
            }),
        }
    }
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(text: &str) -> Chunk {
        Chunk {
            chunk_id: "c".into(),
            doc_id: "d".into(),
            text: text.into(),
            word_count: text.split_whitespace().count(),
            section_path: Vec::new(),
            metadata: Default::default(),
            start: 0,
            end: text.len(),
            warning: None,
        }
    }

    #[test]
    fn tiny_chunk_dropped_as_too_short() {
        let (kept, dropped) =
            filter_uninformative(vec![chunk("just three words")], &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(dropped[0].reason, "too-short");
    }

    #[test]
    fn ordinary_prose_kept() {
        let text = (0..200)
            .map(|i| format!("word{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        let (kept, dropped) = filter_uninformative(vec![chunk(&text)], &FilterConfig::default());
        assert_eq!(kept.len(), 1);
        assert!(dropped.is_empty());
    }

    #[test]
    fn digit_heavy_chunk_dropped_as_low_alpha() {
        let text = (0..50)
            .map(|i| format!("{i}{i}{i}{i}{i}.{i};"))
            .collect::<Vec<_>>()
            .join(" ");
        let (kept, dropped) = filter_uninformative(vec![chunk(&text)], &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(dropped[0].reason, "low-alpha");
    }

    #[test]
    fn repeated_word_chunk_dropped_as_low_diversity() {
        let text = vec!["same"; 100].join(" ");
        let (_, dropped) = filter_uninformative(vec![chunk(&text)], &FilterConfig::default());
        assert_eq!(dropped[0].reason, "low-diversity");
    }
}
