//! Token counting behind a pluggable trait.
//!
//! Budgets are enforced in tokens but no tokenizer is bundled, so the
//! default counter approximates: ceil(whitespace words * 4/3). Any
//! replacement must satisfy count("") == 0 and monotonicity under
//! concatenation.

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Longest prefix (at word granularity) within `budget` tokens.
    fn truncate_tail(&self, text: &str, budget: usize) -> String {
        if self.count(text) <= budget {
            return text.to_string();
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut lo = 0usize;
        let mut hi = words.len();
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.count(&words[..mid].join(" ")) <= budget {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        words[..lo].join(" ")
    }

    /// Keep head and tail, cutting the middle, within `budget` tokens.
    fn truncate_middle(&self, text: &str, budget: usize) -> String {
        if self.count(text) <= budget {
            return text.to_string();
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        let marker = "[...]";
        let mut keep = words.len().saturating_sub(1);
        while keep > 0 {
            let head = keep / 2 + keep % 2;
            let tail = keep / 2;
            let candidate = format!(
                "{} {} {}",
                words[..head].join(" "),
                marker,
                words[words.len() - tail..].join(" ")
            );
            if self.count(&candidate) <= budget {
                return candidate;
            }
            // shrink multiplicatively first, then linearly near the end
            keep = if keep > 16 { keep * 7 / 8 } else { keep - 1 };
        }
        marker.to_string()
    }
}

/// ceil(words * 4/3), the documented default approximation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenCounter;

impl TokenCounter for ApproxTokenCounter {
    fn count(&self, text: &str) -> usize {
        let words = text.split_whitespace().count();
        words.div_ceil(3) + words // ceil(4w/3) = w + ceil(w/3)
    }
}
