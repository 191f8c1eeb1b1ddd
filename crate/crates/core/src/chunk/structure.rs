//! Structure detection: sections, paragraphs, sentences, protected spans.
//!
//! Protected spans are found first (Markdown table blocks, then LaTeX
//! math in the remaining text), because heading, paragraph and sentence
//! boundaries inside a span must not count as boundaries.

use serde::{Deserialize, Serialize};

use crate::corpus::CleanDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanKind {
    LatexInline,
    LatexDisplay,
    MarkdownTable,
}

/// A byte range that must never be split across chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedSpan {
    pub start: usize,
    pub end: usize,
    pub kind: SpanKind,
}

#[derive(Debug, Clone)]
pub struct Section {
    /// Heading text without markers; None for preamble text before the
    /// first heading.
    pub heading: Option<String>,
    /// Heading stack from the document root down to this section.
    pub path: Vec<String>,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct DocumentStructure {
    pub sections: Vec<Section>,
    /// Paragraph byte ranges; a protected span never crosses one.
    pub paragraphs: Vec<(usize, usize)>,
    /// Sentence byte ranges tiling each paragraph.
    pub sentences: Vec<(usize, usize)>,
    pub protected: Vec<ProtectedSpan>,
    pub warnings: Vec<String>,
}

pub fn detect_structure(doc: &CleanDocument) -> DocumentStructure {
    let text = &doc.text;
    let mut warnings = Vec::new();

    let mut protected = detect_tables(text);
    let mut math = detect_math(text, &protected, &mut warnings);
    protected.append(&mut math);
    protected.sort_by_key(|s| s.start);

    let paragraphs = merge_paragraphs_over_spans(crate::corpus::paragraph_segments(text), &protected);
    let sections = detect_sections(text, &protected);
    let sentences = detect_sentences(text, &paragraphs, &protected);

    DocumentStructure {
        sections,
        paragraphs,
        sentences,
        protected,
        warnings,
    }
}

fn inside_any(pos: usize, spans: &[ProtectedSpan]) -> bool {
    spans.iter().any(|s| pos >= s.start && pos < s.end)
}

fn line_intersects(start: usize, end: usize, spans: &[ProtectedSpan]) -> bool {
    spans.iter().any(|s| s.start < end && s.end > start)
}

/// Maximal runs of two or more lines whose trimmed form starts with `|`.
fn detect_tables(text: &str) -> Vec<ProtectedSpan> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut run_lines = 0usize;
    let mut run_end = 0usize;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches('\n');
        if content.trim_start().starts_with('|') {
            if run_start.is_none() {
                run_start = Some(offset);
            }
            run_lines += 1;
            run_end = offset + content.trim_end().len();
        } else {
            if let Some(s) = run_start.take() {
                if run_lines >= 2 {
                    spans.push(ProtectedSpan {
                        start: s,
                        end: run_end,
                        kind: SpanKind::MarkdownTable,
                    });
                }
            }
            run_lines = 0;
        }
        offset += line.len();
    }
    if let Some(s) = run_start {
        if run_lines >= 2 {
            spans.push(ProtectedSpan {
                start: s,
                end: run_end,
                kind: SpanKind::MarkdownTable,
            });
        }
    }
    spans
}

/// End of the paragraph containing `pos`: the next blank line or EOF.
fn paragraph_end_from(text: &str, pos: usize) -> usize {
    let bytes = text.as_bytes();
    let mut i = pos;
    loop {
        match bytes[i..].iter().position(|&b| b == b'\n') {
            None => return text.len(),
            Some(off) => {
                let line_start = i + off + 1;
                let line_end = bytes[line_start..]
                    .iter()
                    .position(|&b| b == b'\n')
                    .map(|o| line_start + o)
                    .unwrap_or(text.len());
                if text[line_start..line_end].trim().is_empty() {
                    return i + off;
                }
                i = line_start;
            }
        }
    }
}

/// LaTeX math outside table spans: `$$..$$` and `\[..\]` display,
/// `$..$` and `\(..\)` inline. An unterminated delimiter extends the span
/// to the end of the paragraph and records a warning.
fn detect_math(text: &str, tables: &[ProtectedSpan], warnings: &mut Vec<String>) -> Vec<ProtectedSpan> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if inside_any(i, tables) {
            i += 1;
            continue;
        }
        let b = bytes[i];
        if b == b'\\' && i + 1 < bytes.len() {
            let next = bytes[i + 1];
            if next == b'$' {
                i += 2; // escaped dollar
                continue;
            }
            if next == b'[' || next == b'(' {
                let close: &[u8] = if next == b'[' { b"\\]" } else { b"\\)" };
                let kind = if next == b'[' {
                    SpanKind::LatexDisplay
                } else {
                    SpanKind::LatexInline
                };
                match find_sub(bytes, close, i + 2) {
                    Some(j) => {
                        spans.push(ProtectedSpan {
                            start: i,
                            end: j + 2,
                            kind,
                        });
                        i = j + 2;
                    }
                    None => {
                        let end = paragraph_end_from(text, i);
                        warnings.push(format!("unterminated math delimiter at byte {i}"));
                        spans.push(ProtectedSpan { start: i, end, kind });
                        i = end;
                    }
                }
                continue;
            }
            i += 2;
            continue;
        }
        if b == b'$' {
            let display = i + 1 < bytes.len() && bytes[i + 1] == b'$';
            let (close, kind, open_len): (&[u8], _, usize) = if display {
                (b"$$", SpanKind::LatexDisplay, 2)
            } else {
                (b"$", SpanKind::LatexInline, 1)
            };
            let para_end = paragraph_end_from(text, i);
            // Display blocks may cross blank lines; a lone inline dollar
            // only protects as far as its own paragraph.
            let limit = if display { bytes.len() } else { para_end };
            match find_sub_unescaped(bytes, close, i + open_len, limit) {
                Some(j) => {
                    spans.push(ProtectedSpan {
                        start: i,
                        end: j + close.len(),
                        kind,
                    });
                    i = j + close.len();
                }
                None => {
                    warnings.push(format!("unterminated math delimiter at byte {i}"));
                    spans.push(ProtectedSpan {
                        start: i,
                        end: para_end,
                        kind,
                    });
                    i = para_end;
                }
            }
            continue;
        }
        i += 1;
    }
    spans
}

fn find_sub(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= haystack.len() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| from + p)
}

/// Find `needle` in `haystack[from..limit]`, skipping backslash-escaped
/// dollars.
fn find_sub_unescaped(haystack: &[u8], needle: &[u8], from: usize, limit: usize) -> Option<usize> {
    let mut i = from;
    while i + needle.len() <= limit {
        if haystack[i] == b'\\' {
            i += 2;
            continue;
        }
        if &haystack[i..i + needle.len()] == needle {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Markdown headings (`#` runs) and short numbered headings ("2. Methods").
/// Returns (level, heading text) when the line is a heading.
fn parse_heading(line: &str) -> Option<(usize, String)> {
    let trimmed = line.trim_end();
    if let Some(rest) = trimmed.strip_prefix('#') {
        let extra = rest.chars().take_while(|&c| c == '#').count();
        let level = 1 + extra;
        if level <= 6 {
            let title = rest[extra..].trim();
            if !title.is_empty() && rest[extra..].starts_with(' ') {
                return Some((level, title.to_string()));
            }
        }
        return None;
    }
    // Numbered heading: "2. Methods", "2.1 Data Sources". Short line,
    // capitalized word after the number, no terminal period.
    if trimmed.len() > 100 || trimmed.ends_with('.') {
        return None;
    }
    let mut parts = trimmed.splitn(2, ' ');
    let number = parts.next()?;
    let title = parts.next()?.trim();
    if title.is_empty() || !title.chars().next().is_some_and(|c| c.is_uppercase()) {
        return None;
    }
    let numeric = number.trim_end_matches('.');
    if numeric.is_empty()
        || !numeric
            .split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
    {
        return None;
    }
    let level = numeric.split('.').count();
    Some((level, format!("{number} {title}")))
}

fn detect_sections(text: &str, protected: &[ProtectedSpan]) -> Vec<Section> {
    struct Heading {
        start: usize,
        level: usize,
        title: String,
    }
    let mut headings = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content_len = line.trim_end_matches('\n').len();
        if !line_intersects(offset, offset + content_len.max(1), protected) {
            if let Some((level, title)) = parse_heading(line) {
                headings.push(Heading {
                    start: offset,
                    level,
                    title,
                });
            }
        }
        offset += line.len();
    }

    let mut sections = Vec::new();
    if headings.is_empty() {
        if !text.is_empty() {
            sections.push(Section {
                heading: None,
                path: Vec::new(),
                start: 0,
                end: text.len(),
            });
        }
        return sections;
    }
    if headings[0].start > 0 {
        sections.push(Section {
            heading: None,
            path: Vec::new(),
            start: 0,
            end: headings[0].start,
        });
    }
    let mut stack: Vec<(usize, String)> = Vec::new();
    for (i, h) in headings.iter().enumerate() {
        while stack.last().is_some_and(|(l, _)| *l >= h.level) {
            stack.pop();
        }
        stack.push((h.level, h.title.clone()));
        let end = headings
            .get(i + 1)
            .map(|n| n.start)
            .unwrap_or(text.len());
        sections.push(Section {
            heading: Some(h.title.clone()),
            path: stack.iter().map(|(_, t)| t.clone()).collect(),
            start: h.start,
            end,
        });
    }
    sections
}

/// Merge paragraph ranges so no protected span crosses a boundary.
fn merge_paragraphs_over_spans(
    paragraphs: Vec<(usize, usize)>,
    protected: &[ProtectedSpan],
) -> Vec<(usize, usize)> {
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(paragraphs.len());
    for (start, end) in paragraphs {
        if let Some(last) = merged.last_mut() {
            let bridged = protected
                .iter()
                .any(|s| s.start < last.1 && s.end > start);
            if bridged {
                last.1 = end;
                continue;
            }
        }
        merged.push((start, end));
    }
    merged
}

/// Sentence ranges tiling each paragraph. A boundary is terminal
/// punctuation followed by whitespace, outside protected spans; the
/// trailing whitespace belongs to the earlier sentence.
fn detect_sentences(
    text: &str,
    paragraphs: &[(usize, usize)],
    protected: &[ProtectedSpan],
) -> Vec<(usize, usize)> {
    let mut sentences = Vec::new();
    for &(pstart, pend) in paragraphs {
        let mut sent_start = pstart;
        let slice = &text[pstart..pend];
        let mut iter = slice.char_indices().peekable();
        while let Some((off, c)) = iter.next() {
            let pos = pstart + off;
            if matches!(c, '.' | '!' | '?') && !inside_any(pos, protected) {
                let after = iter.peek().map(|&(o, _)| pstart + o).unwrap_or(pend);
                let rest = &text[after..pend];
                if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                    let next_start = after
                        + rest
                            .char_indices()
                            .find(|(_, ch)| !ch.is_whitespace())
                            .map(|(o, _)| o)
                            .unwrap_or(rest.len());
                    sentences.push((sent_start, next_start));
                    sent_start = next_start;
                }
            }
        }
        if sent_start < pend {
            sentences.push((sent_start, pend));
        }
    }
    sentences
}
