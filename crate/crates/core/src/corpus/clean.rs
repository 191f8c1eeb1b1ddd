//! The cleaning passes, applied in fixed order.
//!
//! Every pass is a pure string transformation and idempotent: applying a
//! pass to its own output changes nothing. Passes that can cascade
//! (deleting a tag may expose another tag, collapsing one repeat may make
//! two spans adjacent) iterate to a fixed point internally.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CleanDocument, CleaningLogEntry, CorpusError, RawDocument};

/// Knobs for the cleaning passes. Defaults follow the shipped pipeline
/// configuration; every threshold is recorded in the output config snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    /// Regexes deleted by the artifact pass. The default catches the
    /// extraction warning/error tags and any angle-bracketed all-caps token.
    pub tag_patterns: Vec<String>,
    /// Minimum length (chars) of a repeated span worth collapsing.
    pub ocr_min_span: usize,
    /// Maximum intervening chars between the two copies.
    pub ocr_max_gap: usize,
    /// Longest repeated span searched for.
    pub ocr_max_span: usize,
    /// A line is dropped when one repeated symbol makes up at least this
    /// fraction of its non-whitespace chars...
    pub low_info_ratio: f64,
    /// ...and the line has at least this many non-whitespace chars.
    pub low_info_min_len: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            tag_patterns: vec!["<[A-Z][A-Z0-9_]*>".to_string()],
            ocr_min_span: 8,
            ocr_max_gap: 2,
            ocr_max_span: 256,
            low_info_ratio: 0.8,
            low_info_min_len: 5,
        }
    }
}

impl CleanConfig {
    pub fn compiled_tags(&self) -> Result<Vec<Regex>, CorpusError> {
        self.tag_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|source| CorpusError::BadPattern {
                    pattern: p.clone(),
                    source,
                })
            })
            .collect()
    }
}

/// A span dropped by the OCR-duplication pass. Offsets are byte positions
/// in the text the pass iteration ran on (the original input for first-round
/// removals, which is the overwhelmingly common case).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Delete every occurrence of the configured tag patterns, leaving all
/// other bytes untouched. Iterates until no pattern matches, so deletions
/// that expose new tags still converge.
pub fn remove_extraction_artifacts(text: &str, tags: &[Regex]) -> (String, usize) {
    let mut current = text.to_string();
    let mut edits = 0;
    loop {
        let mut changed = false;
        for tag in tags {
            let count = tag.find_iter(&current).count();
            if count > 0 {
                edits += count;
                current = tag.replace_all(&current, "").into_owned();
                changed = true;
            }
        }
        if !changed {
            return (current, edits);
        }
    }
}

static MERGED_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([0-9]+)([A-Z][a-z])").expect("valid regex"));

/// Split digit-runs glued to an uppercase-initial word: `1Introduction`
/// becomes `1 Introduction`. The next char after the capital must be
/// lowercase so acronym-like tokens (`3D`, `5G`) survive.
pub fn correct_merged_words(text: &str) -> (String, usize) {
    let edits = MERGED_WORD.find_iter(text).count();
    if edits == 0 {
        return (text.to_string(), 0);
    }
    (MERGED_WORD.replace_all(text, "$1 $2").into_owned(), edits)
}

/// Collapse adjacent repeated spans (OCR stutter) to a single occurrence.
///
/// A repeat is a span of at least `ocr_min_span` chars followed, after at
/// most `ocr_max_gap` intervening chars, by an identical copy. The first
/// copy is kept; the gap and the second copy are dropped and reported.
pub fn remove_ocr_duplication(text: &str, cfg: &CleanConfig) -> (String, Vec<RemovedSpan>) {
    let mut current = text.to_string();
    let mut removed = Vec::new();
    loop {
        let (next, mut spans) = collapse_once(&current, cfg);
        let done = spans.is_empty();
        removed.append(&mut spans);
        if done {
            return (current, removed);
        }
        current = next;
    }
}

fn collapse_once(text: &str, cfg: &CleanConfig) -> (String, Vec<RemovedSpan>) {
    let chars: Vec<char> = text.chars().collect();
    let mut byte_of = Vec::with_capacity(chars.len() + 1);
    let mut b = 0;
    for c in &chars {
        byte_of.push(b);
        b += c.len_utf8();
    }
    byte_of.push(b);

    let mut out: Vec<char> = Vec::with_capacity(chars.len());
    // Input char index each emitted char came from, for span reporting.
    let mut src: Vec<usize> = Vec::with_capacity(chars.len());
    let mut removed = Vec::new();
    let mut i = 0;
    'scan: while i < chars.len() {
        let remaining = chars.len() - i;
        for gap in 0..=cfg.ocr_max_gap {
            if out.len() < gap + cfg.ocr_min_span {
                continue;
            }
            let avail = out.len() - gap;
            let top = cfg.ocr_max_span.min(avail).min(remaining);
            if top < cfg.ocr_min_span {
                continue;
            }
            for len in (cfg.ocr_min_span..=top).rev() {
                let tail = out.len() - gap - len;
                // Three-point prefilter before the full slice compare.
                if out[tail] != chars[i]
                    || out[out.len() - gap - 1] != chars[i + len - 1]
                    || out[tail + len / 2] != chars[i + len / 2]
                {
                    continue;
                }
                if out[tail..out.len() - gap] == chars[i..i + len] {
                    let start = if gap > 0 {
                        byte_of[src[out.len() - gap]]
                    } else {
                        byte_of[i]
                    };
                    let end = byte_of[i + len];
                    removed.push(RemovedSpan {
                        start,
                        end,
                        text: text[start..end].to_string(),
                    });
                    out.truncate(out.len() - gap);
                    src.truncate(src.len() - gap);
                    i += len;
                    continue 'scan;
                }
            }
        }
        out.push(chars[i]);
        src.push(i);
        i += 1;
    }
    (out.into_iter().collect(), removed)
}

static EXCESS_NEWLINES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\n{3,}").expect("valid regex"));

/// Drop low-information lines (a single repeated symbol dominating the
/// line) and collapse runs of three or more newlines to exactly two.
pub fn rule_based_filter(text: &str, cfg: &CleanConfig) -> (String, usize) {
    let mut edits = 0;
    let mut kept = String::with_capacity(text.len());
    let mut kept_any = false;
    for line in text.split('\n') {
        if is_low_info_line(line, cfg) {
            edits += 1;
            continue;
        }
        if kept_any {
            kept.push('\n');
        }
        kept.push_str(line);
        kept_any = true;
    }
    edits += EXCESS_NEWLINES.find_iter(&kept).count();
    let collapsed = EXCESS_NEWLINES.replace_all(&kept, "\n\n").into_owned();
    (collapsed, edits)
}

fn is_low_info_line(line: &str, cfg: &CleanConfig) -> bool {
    let non_ws: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
    if non_ws.len() < cfg.low_info_min_len {
        return false;
    }
    let mut counts = std::collections::HashMap::new();
    for &c in &non_ws {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let (&top_char, &top_count) = counts.iter().max_by_key(|(_, &n)| n).expect("non-empty");
    !top_char.is_alphanumeric() && top_count as f64 / non_ws.len() as f64 >= cfg.low_info_ratio
}

static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+").expect("valid regex")
});

/// Replace every email address with the literal token `[EMAIL]`.
pub fn anonymize_emails(text: &str) -> (String, usize) {
    let edits = EMAIL.find_iter(text).count();
    if edits == 0 {
        return (text.to_string(), 0);
    }
    (EMAIL.replace_all(text, "[EMAIL]").into_owned(), edits)
}

/// Expose the email pattern so completeness checks can scan output text.
pub fn email_pattern() -> &'static Regex {
    &EMAIL
}

/// Run the full pass order on one document and log every pass applied.
pub fn clean_document(doc: &RawDocument, cfg: &CleanConfig) -> Result<CleanDocument, CorpusError> {
    let tags = cfg.compiled_tags()?;
    let mut log = Vec::new();

    let (text, edits) = remove_extraction_artifacts(&doc.text, &tags);
    log.push(CleaningLogEntry {
        pass: "remove_extraction_artifacts".into(),
        edits,
    });
    let (text, edits) = correct_merged_words(&text);
    log.push(CleaningLogEntry {
        pass: "correct_merged_words".into(),
        edits,
    });
    let (text, spans) = remove_ocr_duplication(&text, cfg);
    log.push(CleaningLogEntry {
        pass: "remove_ocr_duplication".into(),
        edits: spans.len(),
    });
    let (text, edits) = rule_based_filter(&text, cfg);
    log.push(CleaningLogEntry {
        pass: "rule_based_filter".into(),
        edits,
    });
    let (text, edits) = anonymize_emails(&text);
    log.push(CleaningLogEntry {
        pass: "anonymize_emails".into(),
        edits,
    });

    Ok(CleanDocument {
        id: doc.id.clone(),
        text,
        metadata: doc.metadata.clone(),
        cleaning_log: log,
    })
}
