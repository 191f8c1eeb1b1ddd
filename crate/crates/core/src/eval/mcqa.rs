//! MCQA option-set scoring and binary hallucination F1.

use std::collections::BTreeSet;

use super::EvalError;

/// Exact-set-match accuracy and mean option-set IoU over samples.
/// Predictions and gold are letter sets; both empty on one sample counts
/// as IoU 1 (vacuous agreement).
pub fn mcqa_score(
    predictions: &[BTreeSet<char>],
    gold: &[BTreeSet<char>],
) -> Result<(f64, f64), EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            pred: predictions.len(),
            gold: gold.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptySampleSet);
    }
    let mut exact = 0usize;
    let mut iou_sum = 0.0;
    for (p, g) in predictions.iter().zip(gold) {
        if p == g {
            exact += 1;
        }
        let union = p.union(g).count();
        let inter = p.intersection(g).count();
        iou_sum += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
    }
    let n = predictions.len() as f64;
    Ok((exact as f64 / n, iou_sum / n))
}

/// F1 on the positive (hallucinated = true) class.
pub fn hallucination_f1(pred: &[bool], gold: &[bool]) -> Result<f64, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::EmptySampleSet);
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}
