// SPDX-License-Identifier: Apache-2.0

//! Outcome-split score histograms with per-outcome percentage frequencies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::confusion;
use crate::dataset::Label;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 20;

/// Outcome streams in export order.
pub const OUTCOMES: [&str; 4] = ["TP", "TN", "FP", "FN"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramExport {
    /// `n_bins + 1` edges from -1 to 1.
    pub edges: Vec<f64>,
    /// Samples per outcome, in [`OUTCOMES`] order.
    pub counts: [usize; 4],
    /// Percentage per bin for each outcome, in [`OUTCOMES`] order. An empty
    /// outcome has all-zero frequencies.
    pub percent: [Vec<f64>; 4],
}

fn outcome(t: Label, p: Label) -> usize {
    match (t, p) {
        (Label::Normal, Label::Normal) => 0,
        (Label::Anomaly, Label::Anomaly) => 1,
        (Label::Anomaly, Label::Normal) => 2,
        (Label::Normal, Label::Anomaly) => 3,
    }
}

/// Bin of a score on `[-1, 1]`; bins are half-open except the last, which
/// also takes 1.0. Out-of-range scores land in the end bins.
pub fn bin_index(score: f64, n_bins: usize) -> usize {
    let pos = ((score + 1.0) / 2.0 * n_bins as f64).floor();
    (pos.max(0.0) as usize).min(n_bins - 1)
}

pub fn histogram_export(
    final_scores: &[f64],
    labels_true: &[Label],
    labels_pred: &[Label],
    n_bins: usize,
) -> Result<HistogramExport> {
    if n_bins < 2 {
        return Err(Error::InvalidParams(format!("n_bins must be at least 2, got {n_bins}")));
    }
    // validates the label lengths
    confusion(labels_true, labels_pred)?;
    if final_scores.len() != labels_true.len() {
        return Err(Error::LengthMismatch { left: final_scores.len(), right: labels_true.len() });
    }
    let edges = (0..=n_bins).map(|i| -1.0 + 2.0 * i as f64 / n_bins as f64).collect();
    let mut bins = [(); 4].map(|_| vec![0usize; n_bins]);
    let mut counts = [0usize; 4];
    for ((&s, &t), &p) in final_scores.iter().zip(labels_true).zip(labels_pred) {
        let o = outcome(t, p);
        bins[o][bin_index(s, n_bins)] += 1;
        counts[o] += 1;
    }
    let percent = [0, 1, 2, 3].map(|o| {
        bins[o]
            .iter()
            .map(|&b| if counts[o] == 0 { 0.0 } else { 100.0 * b as f64 / counts[o] as f64 })
            .collect()
    });
    Ok(HistogramExport { edges, counts, percent })
}

impl HistogramExport {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// One row per outcome and bin: `outcome,bin,lower,upper,count,percent`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["outcome", "bin", "lower", "upper", "percent"]).map_err(io)?;
        for (o, name) in OUTCOMES.iter().enumerate() {
            for b in 0..self.n_bins() {
                w.write_record([
                    name.to_string(),
                    b.to_string(),
                    self.edges[b].to_string(),
                    self.edges[b + 1].to_string(),
                    self.percent[o][b].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table, one row per bin.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>14}", "bin");
        for name in OUTCOMES {
            out += &format!(" {name:>8}");
        }
        out.push('\n');
        for b in 0..self.n_bins() {
            out += &format!("[{:>5.2},{:>5.2}) ", self.edges[b], self.edges[b + 1]);
            for o in 0..4 {
                out += &format!(" {:>8.2}", self.percent[o][b]);
            }
            out.push('\n');
        }
        out
    }
}
