// SPDX-License-Identifier: Apache-2.0

//! Confusion counts and support-weighted metrics.
//!
//! Polarity: normal is the positive class. `tp` is a normal sample
//! predicted normal, `tn` an anomaly predicted anomaly, `fp` an anomaly
//! predicted normal (a missed attack) and `fn_` a normal sample flagged as
//! an anomaly.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
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
}

pub fn confusion(labels_true: &[Label], labels_pred: &[Label]) -> Result<ConfusionCounts> {
    if labels_true.len() != labels_pred.len() {
        return Err(Error::LengthMismatch { left: labels_true.len(), right: labels_pred.len() });
    }
    let mut c = ConfusionCounts::default();
    for (t, p) in labels_true.iter().zip(labels_pred) {
        match (t, p) {
            (Label::Normal, Label::Normal) => c.tp += 1,
            (Label::Anomaly, Label::Anomaly) => c.tn += 1,
            (Label::Anomaly, Label::Normal) => c.fp += 1,
            (Label::Normal, Label::Anomaly) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    /// Per-class precision averaged with class-support weights.
    pub precision: f64,
    /// Per-class recall averaged with class-support weights; equals accuracy.
    pub recall: f64,
    /// Harmonic mean of `precision` and `recall`.
    pub f1: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub undefined: bool,
}

/// `(ratio, undefined)`; a zero denominator yields 0.
fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(counts: &ConfusionCounts) -> MetricsReport {
    let n = counts.total();
    let ConfusionCounts { tp, tn, fp, fn_ } = *counts;
    let (accuracy, mut undefined) = ratio(tp + tn, n);

    // (precision, recall, support) for the normal and anomaly classes
    let classes = [(tp, tp + fp, tp + fn_), (tn, tn + fn_, tn + fp)];
    let (mut precision, mut recall) = (0.0, 0.0);
    for (hit, predicted, support) in classes {
        let (p, up) = ratio(hit, predicted);
        let (r, ur) = ratio(hit, support);
        undefined |= up || ur;
        let w = ratio(support, n).0;
        precision += w * p;
        recall += w * r;
    }
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined = true;
        0.0
    };
    MetricsReport { counts: *counts, accuracy, precision, recall, f1, undefined }
}

pub fn evaluate_labels(labels_true: &[Label], labels_pred: &[Label]) -> Result<MetricsReport> {
    Ok(metrics(&confusion(labels_true, labels_pred)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Anomaly as A, Normal as N};

    #[test]
    fn polarity() {
        let c = confusion(&[N, A, A, N], &[N, A, N, A]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 1, fp: 1, fn_: 1 });
        let c = confusion(&[N, N, N], &[A, A, A]).unwrap();
        assert_eq!(c.fn_, 3);
        assert!(matches!(confusion(&[N], &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn perfect_predictions() {
        let m = metrics(&ConfusionCounts { tp: 7, tn: 3, fp: 0, fn_: 0 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.undefined);
    }

    #[test]
    fn all_missed_anomalies() {
        let m = metrics(&ConfusionCounts { tp: 0, tn: 0, fp: 10, fn_: 0 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.0, 0.0, 0.0, 0.0));
        assert!(m.undefined);
    }
}
