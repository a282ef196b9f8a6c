//! Threshold-similarity F1: agreement between a method's binary anomaly
//! decisions and the ground-truth NBM's decisions on the same test windows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("decision vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no reports to emit")]
    NoReports,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Confusion counts and F1 of one method against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub f1: f64,
    /// Set when the degenerate no-positive convention (F1 := 0) applied.
    pub degenerate: bool,
}

/// `F1 = 2 TP / (2 TP + FP + FN)`, defined as 0 when the denominator is 0.
pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Confusion counts of `y` against ground truth `y_star`, plus F1.
pub fn f1_vs_ground_truth(y_star: &[bool], y: &[bool]) -> Result<EvaluationReport, EvalError> {
    if y_star.len() != y.len() {
        return Err(EvalError::LengthMismatch(y_star.len(), y.len()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&truth, &pred) in y_star.iter().zip(y) {
        match (truth, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let degenerate = 2 * tp + fp + fn_ == 0;
    Ok(EvaluationReport {
        tp,
        fp,
        fn_,
        tn,
        f1: f1_score(tp, fp, fn_),
        degenerate,
    })
}
