use serde::{Deserialize, Serialize};

use crate::dataset::RISKY;

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, pred: u8, truth: u8) {
        match (pred == RISKY, truth == RISKY) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionCounts, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in preds.iter().zip(labels) {
        c.add(p, t);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Replies with no parseable label; scored as low risk.
    pub unparseable_count: usize,
    /// Samples whose request failed outright; also scored as low risk.
    #[serde(default)]
    pub failed_count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision and recall are 0 when their denominators are 0, and so is F1
/// when both are 0.
pub fn metrics(c: &ConfusionCounts) -> Result<MetricReport, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::Empty);
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
        unparseable_count: 0,
        failed_count: 0,
    })
}
