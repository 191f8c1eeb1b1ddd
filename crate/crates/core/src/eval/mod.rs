//! Evaluation metric suite.
//!
//! Token-level retrieval metrics (IoU, precision, recall, document and
//! passage recall, Ref Retrieved Ratio @n, MRR @n), normalized
//! Levenshtein similarity for OCR output, MCQA scoring, judge-panel
//! aggregation and pairwise win rate. Every metric is pure; reports carry
//! per-sample breakdowns plus a config snapshot.

mod gen;
mod judge;
mod mcqa;
mod nls;
mod token_metrics;

pub use gen::generate_eval_set;
pub use judge::{judge_panel_score, win_rate, EvaluatorTally, PairwiseTally, PanelScore};
pub use mcqa::{hallucination_f1, mcqa_score};
pub use nls::{levenshtein, nls};
pub use token_metrics::{
    doc_passage_recall, mrr_at, ref_retrieved_ratio_at, retrieval_eval, token_metrics,
    TokenMetrics, TokenizedCorpus, RETRIEVAL_METRIC_NAMES,
};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::corpus::SpanRef;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("sample {0}: gold excerpt set is empty, recall undefined")]
    EmptyGold(String),
    #[error("unknown document {0:?}")]
    UnknownDoc(String),
    #[error("range {start}..{end} exceeds document {doc_id:?} of length {len}")]
    BadRange {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("prediction/gold length mismatch: {pred} vs {gold}")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("evaluator {0} has zero comparisons")]
    ZeroDenominator(usize),
    #[error("tally has no evaluators")]
    NoEvaluators,
    #[error("all judges failed for this sample")]
    AllJudgesFailed,
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

/// One query with its gold excerpts and a ranked retrieval run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalEvalSample {
    pub query_id: String,
    pub query: String,
    pub gold_excerpts: Vec<SpanRef>,
    /// Ranked best-first.
    #[serde(default)]
    pub retrieved_chunks: Vec<SpanRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub query_id: String,
    pub reason: String,
}

/// Metric values plus per-sample breakdown and the config that produced
/// them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    pub per_sample: Vec<serde_json::Value>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub excluded: Vec<ExcludedSample>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Two-column metric,value table.
    pub fn write_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "metric,value")?;
        for (name, value) in &self.metrics {
            writeln!(file, "{name},{value}")?;
        }
        Ok(())
    }
}
