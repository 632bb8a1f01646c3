//! Confusion counts and the per-class metrics derived from them.
//! Class 1 (trusted) is the positive class.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::{Label, RoundRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (truth, pred) in pairs {
            c.record(truth, pred);
        }
        c
    }

    pub fn record(&mut self, truth: Label, pred: Label) {
        match (truth, pred) {
            (Label::Trusted, Label::Trusted) => self.tp += 1,
            (Label::Untrusted, Label::Trusted) => self.fp += 1,
            (Label::Trusted, Label::Untrusted) => self.fn_ += 1,
            (Label::Untrusted, Label::Untrusted) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision_0: f64,
    pub recall_0: f64,
    pub f1_0: f64,
    pub precision_1: f64,
    pub recall_1: f64,
    pub f1_1: f64,
    pub confusion: ConfusionCounts,
    pub folds: usize,
}

impl MetricsReport {
    /// Metrics from pooled confusion counts. Empty denominators give 0.
    pub fn from_confusion(c: ConfusionCounts, folds: usize) -> Self {
        let precision_1 = ratio(c.tp, c.tp + c.fp);
        let recall_1 = ratio(c.tp, c.tp + c.fn_);
        let precision_0 = ratio(c.tn, c.tn + c.fn_);
        let recall_0 = ratio(c.tn, c.tn + c.fp);
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision_0,
            recall_0,
            f1_0: f1(precision_0, recall_0),
            precision_1,
            recall_1,
            f1_1: f1(precision_1, recall_1),
            confusion: c,
            folds,
        }
    }
}

pub const CURVE_HEADER: [&str; 9] = [
    "round",
    "labeled_size",
    "accuracy",
    "precision_0",
    "recall_0",
    "f1_0",
    "precision_1",
    "recall_1",
    "f1_1",
];

/// Writes a learning curve as CSV, one row per round.
pub fn write_curve_csv(history: &[RoundRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in history {
        let m = &r.metrics;
        w.write_record([
            r.round_index.to_string(),
            r.labeled_size.to_string(),
            m.accuracy.to_string(),
            m.precision_0.to_string(),
            m.recall_0.to_string(),
            m.f1_0.to_string(),
            m.precision_1.to_string(),
            m.recall_1.to_string(),
            m.f1_1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
