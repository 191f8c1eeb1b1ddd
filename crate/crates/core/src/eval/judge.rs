//! Judge-panel aggregation and pairwise win rate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::{Gateway, JudgeRequest};

/// Per-evaluator pairwise counts for model A against model B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorTally {
    pub wins_a: u64,
    pub ties: u64,
    pub losses_a: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairwiseTally {
    pub evaluators: Vec<EvaluatorTally>,
}

/// Average preference across evaluators, ties counted half:
/// WR_A = (1/N) * sum_i (wins_i + 0.5*ties_i) / (wins_i + ties_i + losses_i)
pub fn win_rate(tally: &PairwiseTally) -> Result<f64, EvalError> {
    if tally.evaluators.is_empty() {
        return Err(EvalError::NoEvaluators);
    }
    let mut sum = 0.0;
    for (i, e) in tally.evaluators.iter().enumerate() {
        let denom = e.wins_a + e.ties + e.losses_a;
        if denom == 0 {
            return Err(EvalError::ZeroDenominator(i));
        }
        sum += (e.wins_a as f64 + 0.5 * e.ties as f64) / denom as f64;
    }
    Ok(sum / tally.evaluators.len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelScore {
    /// Mean of per-judge scores normalized to 0-100 (x20).
    pub mean: f64,
    /// Raw 0-5 value per judge; None when that judge was unparsable.
    pub per_judge: Vec<Option<u8>>,
    pub flags: Vec<String>,
}

/// Score one answer with a panel of judges; each 0-5 verdict scales by 20
/// and the parseable verdicts average. A judge failure excludes that
/// judge with a flag; all judges failing is a sample error.
pub fn judge_panel_score(
    question: &str,
    answer: &str,
    reference: &str,
    context: Option<&str>,
    judges: &[Arc<dyn Gateway>],
) -> Result<PanelScore, EvalError> {
    let request = JudgeRequest {
        question: question.to_string(),
        answer: answer.to_string(),
        reference: reference.to_string(),
        context: context.map(str::to_string),
    };
    let mut per_judge = Vec::with_capacity(judges.len());
    let mut flags = Vec::new();
    for (i, judge) in judges.iter().enumerate() {
        match judge.judge(&request) {
            Ok(score) => per_judge.push(Some(score)),
            Err(e) => {
                per_judge.push(None);
                flags.push(format!("judge-{i}-failed: {e}"));
            }
        }
    }
    let usable: Vec<f64> = per_judge
        .iter()
        .flatten()
        .map(|&s| s as f64 * 20.0)
        .collect();
    if usable.is_empty() {
        return Err(EvalError::AllJudgesFailed);
    }
    Ok(PanelScore {
        mean: usable.iter().sum::<f64>() / usable.len() as f64,
        per_judge,
        flags,
    })
}
