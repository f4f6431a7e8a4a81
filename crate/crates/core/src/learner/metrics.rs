//! Precision/recall/F1 for a designated target class, with raw
//! confusion counts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// True when precision or recall had an empty denominator.
    pub degenerate: bool,
}

/// Confusion-matrix metrics for `target` as the positive class.
pub fn evaluate(pred: &[u8], truth: &[u8], target: u8) -> Metrics {
    assert_eq!(pred.len(), truth.len());
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == target, t == target) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let mut degenerate = false;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        degenerate = true;
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        degenerate = true;
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        precision,
        recall,
        f1,
        tp,
        fp,
        tn,
        fn_,
        degenerate,
    }
}

impl Metrics {
    /// Arithmetic mean over folds; confusion counts are summed.
    pub fn mean(folds: &[Metrics]) -> Metrics {
        let n = folds.len().max(1) as f64;
        Metrics {
            precision: folds.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: folds.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: folds.iter().map(|m| m.f1).sum::<f64>() / n,
            tp: folds.iter().map(|m| m.tp).sum(),
            fp: folds.iter().map(|m| m.fp).sum(),
            tn: folds.iter().map(|m| m.tn).sum(),
            fn_: folds.iter().map(|m| m.fn_).sum(),
            degenerate: folds.iter().any(|m| m.degenerate),
        }
    }
}
