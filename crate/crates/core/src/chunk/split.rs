//! Two-pass chunk assembly.
//!
//! Pass 1 keeps every section that fits `target_words` whole. Pass 2
//! decomposes oversize sections into paragraph units, sentence units for
//! oversize paragraphs, and finally word-boundary pieces, then packs
//! consecutive units greedily up to the target. Cut points never land
//! inside a protected span or inside a non-whitespace run, so chunks
//! always rejoin to the whitespace-normalized source.

use super::structure::{detect_structure, ProtectedSpan};
use super::{count_words, Chunk, ChunkConfig, ChunkError};
use crate::corpus::CleanDocument;

#[derive(Debug, Clone, Copy)]
struct Unit {
    start: usize,
    end: usize,
    words: usize,
}

pub fn chunk_document(doc: &CleanDocument, config: &ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    config.validate()?;
    if doc.text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let structure = detect_structure(doc);
    let text = &doc.text;

    let mut chunks = Vec::new();
    for section in &structure.sections {
        let section_words = count_words(&text[section.start..section.end]);
        let units = if section_words <= config.target_words {
            vec![Unit {
                start: section.start,
                end: section.end,
                words: section_words,
            }]
        } else {
            decompose_section(text, section.start, section.end, &structure, config)
        };
        pack_units(text, doc, &units, &section.path, config, &mut chunks);
    }

    for (i, chunk) in chunks.iter_mut().enumerate() {
        chunk.chunk_id = format!("{}#{:04}", doc.id, i);
    }
    Ok(chunks)
}

fn clip(range: (usize, usize), lo: usize, hi: usize) -> Option<(usize, usize)> {
    let start = range.0.max(lo);
    let end = range.1.min(hi);
    (start < end).then_some((start, end))
}

fn decompose_section(
    text: &str,
    lo: usize,
    hi: usize,
    structure: &super::structure::DocumentStructure,
    config: &ChunkConfig,
) -> Vec<Unit> {
    let mut units = Vec::new();
    for &para in &structure.paragraphs {
        let Some((pstart, pend)) = clip(para, lo, hi) else {
            continue;
        };
        let words = count_words(&text[pstart..pend]);
        if words == 0 {
            continue;
        }
        if words <= config.target_words {
            units.push(Unit {
                start: pstart,
                end: pend,
                words,
            });
        } else if config.sentence_fallback {
            for &sent in &structure.sentences {
                let Some((sstart, send)) = clip(sent, pstart, pend) else {
                    continue;
                };
                let words = count_words(&text[sstart..send]);
                if words == 0 {
                    continue;
                }
                if words <= config.hard_max_words {
                    units.push(Unit {
                        start: sstart,
                        end: send,
                        words,
                    });
                } else {
                    word_split(text, sstart, send, &structure.protected, config, &mut units);
                }
            }
        } else {
            word_split(text, pstart, pend, &structure.protected, config, &mut units);
        }
    }
    units
}

/// Split a range at word boundaries into pieces of at most `target_words`,
/// except that two words bridged by a protected span never separate.
fn word_split(
    text: &str,
    lo: usize,
    hi: usize,
    protected: &[ProtectedSpan],
    config: &ChunkConfig,
    units: &mut Vec<Unit>,
) {
    let words = word_ranges(text, lo, hi);
    let mut piece: Vec<(usize, usize)> = Vec::new();
    let bridged = |a: (usize, usize), b: (usize, usize)| {
        protected.iter().any(|s| s.start < a.1 && s.end > b.0)
    };
    for w in words {
        if let Some(&last) = piece.last() {
            if piece.len() >= config.target_words && !bridged(last, w) {
                units.push(Unit {
                    start: piece[0].0,
                    end: last.1,
                    words: piece.len(),
                });
                piece.clear();
            }
        }
        piece.push(w);
    }
    if let Some(&last) = piece.last() {
        units.push(Unit {
            start: piece[0].0,
            end: last.1,
            words: piece.len(),
        });
    }
}

fn word_ranges(text: &str, lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let slice = &text[lo..hi];
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in slice.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((lo + s, lo + i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((lo + s, hi));
    }
    out
}

fn pack_units(
    text: &str,
    doc: &CleanDocument,
    units: &[Unit],
    section_path: &[String],
    config: &ChunkConfig,
    chunks: &mut Vec<Chunk>,
) {
    let mut acc: Vec<Unit> = Vec::new();
    let flush = |acc: &mut Vec<Unit>, chunks: &mut Vec<Chunk>| {
        if acc.is_empty() {
            return;
        }
        let start = acc[0].start;
        let end = acc[acc.len() - 1].end;
        acc.clear();
        emit(text, doc, start, end, section_path, config, chunks);
    };
    for &unit in units {
        if unit.words == 0 {
            continue;
        }
        let acc_words: usize = acc.iter().map(|u| u.words).sum();
        if !acc.is_empty() && acc_words + unit.words > config.target_words {
            flush(&mut acc, chunks);
        }
        if unit.words > config.target_words {
            emit(text, doc, unit.start, unit.end, section_path, config, chunks);
        } else {
            acc.push(unit);
        }
    }
    flush(&mut acc, chunks);
}

fn emit(
    text: &str,
    doc: &CleanDocument,
    start: usize,
    end: usize,
    section_path: &[String],
    config: &ChunkConfig,
    chunks: &mut Vec<Chunk>,
) {
    let slice = &text[start..end];
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return;
    }
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    let (start, end) = (start + lead, end - trail);
    let word_count = count_words(trimmed);
    let warning = (word_count > config.hard_max_words)
        .then(|| "protected span exceeds hard_max_words".to_string());
    chunks.push(Chunk {
        chunk_id: String::new(),
        doc_id: doc.id.clone(),
        text: trimmed.to_string(),
        word_count,
        section_path: section_path.to_vec(),
        metadata: doc.metadata.clone(),
        start,
        end,
        warning,
    });
}
