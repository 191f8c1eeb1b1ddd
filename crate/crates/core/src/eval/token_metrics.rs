//! Token-level retrieval metrics.
//!
//! Token identity is the whitespace-word position within its document, so
//! overlap is positional. Retrieved positions keep their multiplicity
//! across chunks in the denominator (redundant retrieval is penalized)
//! while the intersection counts each position once:
//!
//! precision = hit / retrieved_total
//! recall    = hit / gold
//! iou       = hit / (retrieved_total + gold - hit)

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use serde_json::json;

use super::{EvalError, EvalReport, ExcludedSample, RetrievalEvalSample, SpanRef};

pub const RETRIEVAL_METRIC_NAMES: &[&str] = &[
    "iou",
    "precision",
    "recall",
    "doc_recall",
    "passage_recall",
    "rrr_at_n",
    "mrr_at_n",
];

/// Word token byte-ranges per document, computed once per corpus.
pub struct TokenizedCorpus {
    tokens: HashMap<String, Vec<(usize, usize)>>,
    lengths: HashMap<String, usize>,
}

impl TokenizedCorpus {
    pub fn new(docs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut tokens = HashMap::new();
        let mut lengths = HashMap::new();
        for (id, text) in docs {
            let mut ranges = Vec::new();
            let mut start = None;
            for (i, c) in text.char_indices() {
                if c.is_whitespace() {
                    if let Some(s) = start.take() {
                        ranges.push((s, i));
                    }
                } else if start.is_none() {
                    start = Some(i);
                }
            }
            if let Some(s) = start {
                ranges.push((s, text.len()));
            }
            lengths.insert(id.clone(), text.len());
            tokens.insert(id, ranges);
        }
        Self { tokens, lengths }
    }

    fn validate(&self, span: &SpanRef) -> Result<(), EvalError> {
        let len = *self
            .lengths
            .get(&span.doc_id)
            .ok_or_else(|| EvalError::UnknownDoc(span.doc_id.clone()))?;
        if span.start > span.end || span.end > len {
            return Err(EvalError::BadRange {
                doc_id: span.doc_id.clone(),
                start: span.start,
                end: span.end,
                len,
            });
        }
        Ok(())
    }

    /// Token indices whose byte span intersects the range.
    fn token_indices(&self, span: &SpanRef) -> Result<Vec<usize>, EvalError> {
        self.validate(span)?;
        let tokens = &self.tokens[&span.doc_id];
        Ok(tokens
            .iter()
            .enumerate()
            .filter(|(_, &(s, e))| s < span.end && e > span.start)
            .map(|(i, _)| i)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TokenMetrics {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Raw per-sample counts: (unique hits, retrieved tokens with
/// multiplicity, gold tokens).
fn token_counts(
    sample: &RetrievalEvalSample,
    corpus: &TokenizedCorpus,
) -> Result<(usize, usize, usize), EvalError> {
    let mut gold: HashSet<(&str, usize)> = HashSet::new();
    for span in &sample.gold_excerpts {
        for idx in corpus.token_indices(span)? {
            gold.insert((span.doc_id.as_str(), idx));
        }
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyGold(sample.query_id.clone()));
    }
    let mut retrieved_total = 0usize;
    let mut hit: HashSet<(&str, usize)> = HashSet::new();
    for span in &sample.retrieved_chunks {
        for idx in corpus.token_indices(span)? {
            retrieved_total += 1;
            let key = (span.doc_id.as_str(), idx);
            if gold.contains(&key) {
                hit.insert(key);
            }
        }
    }
    Ok((hit.len(), retrieved_total, gold.len()))
}

fn ratios(hits: usize, retrieved_total: usize, gold: usize) -> TokenMetrics {
    let h = hits as f64;
    let union = retrieved_total as f64 + gold as f64 - h;
    TokenMetrics {
        iou: if union == 0.0 { 0.0 } else { h / union },
        precision: if retrieved_total == 0 {
            0.0
        } else {
            h / retrieved_total as f64
        },
        recall: h / gold as f64,
    }
}

/// Token IoU / precision / recall for one sample. Empty gold is an error
/// (the caller excludes and flags the sample).
pub fn token_metrics(
    sample: &RetrievalEvalSample,
    corpus: &TokenizedCorpus,
) -> Result<TokenMetrics, EvalError> {
    let (hits, retrieved_total, gold) = token_counts(sample, corpus)?;
    Ok(ratios(hits, retrieved_total, gold))
}

/// Is this retrieved chunk relevant: does it contain at least one gold
/// token?
fn chunk_is_relevant(
    chunk: &SpanRef,
    gold: &HashSet<(&str, usize)>,
    corpus: &TokenizedCorpus,
) -> Result<bool, EvalError> {
    Ok(corpus
        .token_indices(chunk)?
        .into_iter()
        .any(|idx| gold.contains(&(chunk.doc_id.as_str(), idx))))
}

fn gold_set<'a>(
    sample: &'a RetrievalEvalSample,
    corpus: &TokenizedCorpus,
) -> Result<HashSet<(&'a str, usize)>, EvalError> {
    let mut gold = HashSet::new();
    for span in &sample.gold_excerpts {
        for idx in corpus.token_indices(span)? {
            gold.insert((span.doc_id.as_str(), idx));
        }
    }
    Ok(gold)
}

/// Document and passage recall over a sample set, macro-averaged.
pub fn doc_passage_recall(
    samples: &[RetrievalEvalSample],
    corpus: &TokenizedCorpus,
) -> Result<(f64, f64), EvalError> {
    let report = retrieval_eval(samples, corpus, usize::MAX)?;
    Ok((
        report.metrics["doc_recall"],
        report.metrics["passage_recall"],
    ))
}

/// Fraction of queries with at least one relevant chunk in the top n.
pub fn ref_retrieved_ratio_at(
    samples: &[RetrievalEvalSample],
    corpus: &TokenizedCorpus,
    n: usize,
) -> Result<f64, EvalError> {
    Ok(retrieval_eval(samples, corpus, n)?.metrics["rrr_at_n"])
}

/// Mean reciprocal rank of the first relevant chunk, zero when none lands
/// in the top n.
pub fn mrr_at(
    samples: &[RetrievalEvalSample],
    corpus: &TokenizedCorpus,
    n: usize,
) -> Result<f64, EvalError> {
    Ok(retrieval_eval(samples, corpus, n)?.metrics["mrr_at_n"])
}

/// Retrieval evaluation over a sample set: token metrics, document and
/// passage recall, RRR@n and MRR@n. Token metrics are macro-averaged per
/// query; micro-averaged variants (pooled counts across queries) ride
/// along under `*_micro` keys. Samples with empty gold are excluded with
/// a reason instead of failing the run.
pub fn retrieval_eval(
    samples: &[RetrievalEvalSample],
    corpus: &TokenizedCorpus,
    at_n: usize,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySampleSet);
    }
    let mut report = EvalReport {
        config: json!({
            "at_n": at_n,
            "token_unit": "whitespace-word-position",
            "token_average": "macro (micro under *_micro keys)",
        }),
        ..Default::default()
    };
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    let mut counted = 0usize;
    let mut pooled_hits = 0usize;
    let mut pooled_retrieved = 0usize;
    let mut pooled_gold = 0usize;

    for sample in samples {
        let gold = gold_set(sample, corpus)?;
        if gold.is_empty() {
            report.excluded.push(ExcludedSample {
                query_id: sample.query_id.clone(),
                reason: "empty-gold".into(),
            });
            continue;
        }
        let (hits, retrieved_total, gold_len) = token_counts(sample, corpus)?;
        let tm = ratios(hits, retrieved_total, gold_len);
        pooled_hits += hits;
        pooled_retrieved += retrieved_total;
        pooled_gold += gold_len;

        let gold_docs: HashSet<&str> = sample
            .gold_excerpts
            .iter()
            .map(|s| s.doc_id.as_str())
            .collect();
        let mut hit_docs: HashSet<&str> = HashSet::new();
        let mut relevant_flags = Vec::with_capacity(sample.retrieved_chunks.len());
        for chunk in &sample.retrieved_chunks {
            let relevant = chunk_is_relevant(chunk, &gold, corpus)?;
            relevant_flags.push(relevant);
            if relevant {
                hit_docs.insert(chunk.doc_id.as_str());
            }
        }
        let doc_recall = hit_docs.intersection(&gold_docs).count() as f64 / gold_docs.len() as f64;
        let passage_recall = if relevant_flags.is_empty() {
            0.0
        } else {
            relevant_flags.iter().filter(|&&r| r).count() as f64 / relevant_flags.len() as f64
        };
        let first_relevant = relevant_flags
            .iter()
            .take(at_n)
            .position(|&r| r)
            .map(|i| i + 1);
        let rrr = if first_relevant.is_some() { 1.0 } else { 0.0 };
        let mrr = first_relevant.map_or(0.0, |rank| 1.0 / rank as f64);

        for (name, value) in [
            ("iou", tm.iou),
            ("precision", tm.precision),
            ("recall", tm.recall),
            ("doc_recall", doc_recall),
            ("passage_recall", passage_recall),
            ("rrr_at_n", rrr),
            ("mrr_at_n", mrr),
        ] {
            *sums.entry(name).or_insert(0.0) += value;
        }
        counted += 1;
        report.per_sample.push(json!({
            "query_id": sample.query_id,
            "iou": tm.iou,
            "precision": tm.precision,
            "recall": tm.recall,
            "doc_recall": doc_recall,
            "passage_recall": passage_recall,
            "first_relevant_rank": first_relevant,
        }));
    }

    if counted == 0 {
        return Err(EvalError::EmptySampleSet);
    }
    for (name, sum) in sums {
        report.metrics.insert(name.to_string(), sum / counted as f64);
    }
    let micro = ratios(pooled_hits, pooled_retrieved, pooled_gold);
    report.metrics.insert("iou_micro".to_string(), micro.iou);
    report
        .metrics
        .insert("precision_micro".to_string(), micro.precision);
    report.metrics.insert("recall_micro".to_string(), micro.recall);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> TokenizedCorpus {
        // doc "d": 10 words, each "w<i>", token i spans bytes [3i, 3i+2).
        let text = (0..10).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        TokenizedCorpus::new(vec![("d".to_string(), text)])
    }

    fn span(start_tok: usize, end_tok: usize) -> SpanRef {
        // byte range covering tokens start_tok..end_tok (exclusive)
        SpanRef {
            doc_id: "d".into(),
            start: start_tok * 3,
            end: end_tok * 3 - 1,
        }
    }

    fn sample(gold: Vec<SpanRef>, retrieved: Vec<SpanRef>) -> RetrievalEvalSample {
        RetrievalEvalSample {
            query_id: "q".into(),
            query: "q".into(),
            gold_excerpts: gold,
            retrieved_chunks: retrieved,
        }
    }

    #[test]
    fn identical_sets_score_one() {
        let s = sample(vec![span(0, 4)], vec![span(0, 4)]);
        let m = token_metrics(&s, &corpus()).unwrap();
        assert_eq!((m.iou, m.precision, m.recall), (1.0, 1.0, 1.0));
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let s = sample(vec![span(0, 2)], vec![span(5, 8)]);
        let m = token_metrics(&s, &corpus()).unwrap();
        assert_eq!((m.iou, m.precision, m.recall), (0.0, 0.0, 0.0));
    }

    #[test]
    fn set_arithmetic_example() {
        // retrieved tokens {1,2,3,4}, gold {3,4,5}
        let s = sample(vec![span(3, 6)], vec![span(1, 5)]);
        let m = token_metrics(&s, &corpus()).unwrap();
        assert!((m.iou - 0.4).abs() < 1e-12);
        assert!((m.precision - 0.5).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_retrieval_penalizes_iou_and_precision_not_recall() {
        // same relevant tokens retrieved twice across two chunks
        let s = sample(vec![span(0, 2)], vec![span(0, 2), span(0, 2)]);
        let m = token_metrics(&s, &corpus()).unwrap();
        assert!((m.recall - 1.0).abs() < 1e-12);
        assert!((m.precision - 0.5).abs() < 1e-12);
        assert!((m.iou - 0.5).abs() < 1e-12); // 2 / (4 + 2 - 2)
    }

    #[test]
    fn empty_gold_is_an_error() {
        let s = sample(vec![], vec![span(0, 2)]);
        assert!(matches!(
            token_metrics(&s, &corpus()),
            Err(EvalError::EmptyGold(_))
        ));
    }

    #[test]
    fn iou_bounded_by_precision_and_recall() {
        let s = sample(vec![span(2, 7)], vec![span(0, 4), span(3, 5)]);
        let m = token_metrics(&s, &corpus()).unwrap();
        assert!(m.iou <= m.precision + 1e-12);
        assert!(m.iou <= m.recall + 1e-12);
    }

    #[test]
    fn full_eval_counts_ranks() {
        let samples = vec![
            // first relevant at rank 1
            sample(vec![span(0, 2)], vec![span(0, 2), span(5, 6)]),
            // first relevant at rank 2
            sample(vec![span(5, 7)], vec![span(0, 2), span(5, 7)]),
            // no relevant chunk
            sample(vec![span(8, 10)], vec![span(0, 2)]),
        ];
        let report = retrieval_eval(&samples, &corpus(), 10).unwrap();
        assert!((report.metrics["rrr_at_n"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((report.metrics["mrr_at_n"] - (1.0 + 0.5 + 0.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rrr_counts_hits_within_cutoff_only() {
        // hits at ranks {1, 11} with n=10 over 2 queries -> 0.5
        let hit_at = |rank: usize| {
            let retrieved: Vec<SpanRef> = (1..=11)
                .map(|i| if i == rank { span(0, 2) } else { span(5, 6) })
                .collect();
            sample(vec![span(0, 2)], retrieved)
        };
        let samples = vec![hit_at(1), hit_at(11)];
        let report = retrieval_eval(&samples, &corpus(), 10).unwrap();
        assert!((report.metrics["rrr_at_n"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_cutoff_applies() {
        // relevant chunk at rank 2 with cutoff 1 contributes zero
        let samples = vec![sample(vec![span(5, 7)], vec![span(0, 2), span(5, 7)])];
        let report = retrieval_eval(&samples, &corpus(), 1).unwrap();
        assert_eq!(report.metrics["rrr_at_n"], 0.0);
        assert_eq!(report.metrics["mrr_at_n"], 0.0);
    }

    #[test]
    fn doc_and_passage_recall_counting() {
        // two retrieved chunks, one relevant -> passage recall 1/2;
        // one gold doc hit -> doc recall 1.
        let samples = vec![sample(vec![span(0, 3)], vec![span(0, 2), span(6, 8)])];
        let report = retrieval_eval(&samples, &corpus(), 10).unwrap();
        assert!((report.metrics["passage_recall"] - 0.5).abs() < 1e-12);
        assert!((report.metrics["doc_recall"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn micro_average_pools_counts_across_queries() {
        // q1: retrieved 4 tokens, 2 hits, gold 3; q2: retrieved 2, 2 hits,
        // gold 2. Micro precision = 4/6, micro recall = 4/5.
        let samples = vec![
            sample(vec![span(3, 6)], vec![span(1, 5)]),
            sample(vec![span(7, 9)], vec![span(7, 9)]),
        ];
        let report = retrieval_eval(&samples, &corpus(), 10).unwrap();
        assert!((report.metrics["precision_micro"] - 4.0 / 6.0).abs() < 1e-12);
        assert!((report.metrics["recall_micro"] - 4.0 / 5.0).abs() < 1e-12);
        assert!((report.metrics["iou_micro"] - 4.0 / 7.0).abs() < 1e-12);
        // macro values differ from micro here
        assert!((report.metrics["precision"] - (0.5 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn standalone_rank_operations_match_report() {
        let samples = vec![
            sample(vec![span(0, 2)], vec![span(0, 2), span(5, 6)]),
            sample(vec![span(5, 7)], vec![span(0, 2), span(5, 7)]),
        ];
        let c = corpus();
        assert!((ref_retrieved_ratio_at(&samples, &c, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!((mrr_at(&samples, &c, 10).unwrap() - 0.75).abs() < 1e-12);
        // each query retrieves two chunks with one relevant
        let (doc, pass) = doc_passage_recall(&samples, &c).unwrap();
        assert!((doc - 1.0).abs() < 1e-12);
        assert!((pass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_gold_samples_are_excluded_not_fatal() {
        let samples = vec![
            sample(vec![], vec![span(0, 2)]),
            sample(vec![span(0, 2)], vec![span(0, 2)]),
        ];
        let report = retrieval_eval(&samples, &corpus(), 10).unwrap();
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.per_sample.len(), 1);
    }

    #[test]
    fn bad_ranges_are_rejected() {
        let s = sample(
            vec![SpanRef {
                doc_id: "d".into(),
                start: 0,
                end: 10_000,
            }],
            vec![],
        );
        assert!(matches!(
            token_metrics(&s, &corpus()),
            Err(EvalError::BadRange { .. })
        ));
        let s = sample(
            vec![SpanRef {
                doc_id: "missing".into(),
                start: 0,
                end: 1,
            }],
            vec![],
        );
        assert!(matches!(
            token_metrics(&s, &corpus()),
            Err(EvalError::UnknownDoc(_))
        ));
    }
}
