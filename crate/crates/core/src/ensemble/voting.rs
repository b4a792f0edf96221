// SPDX-License-Identifier: Apache-2.0

//! Voting functions over one row of normalized detector scores.

use crate::detectors::Detector;

/// Mean of the entries on the majority side. Zero entries vote normal; with
/// an even split the row counts as normal.
pub fn vote_majority(row: &[f64]) -> f64 {
    let normal = row.iter().filter(|&&s| s >= 0.0).count();
    let anomalous = row.len() - normal;
    let keep_normal = normal >= anomalous;
    let (sum, count) = row
        .iter()
        .filter(|&&s| (s >= 0.0) == keep_normal)
        .fold((0.0, 0usize), |(sum, n), &s| (sum + s, n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn vote_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn vote_soft(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

/// `max_k weights[k] * row[k]`.
pub fn vote_weighted(row: &[f64], weights: &[f64]) -> f64 {
    row.iter()
        .zip(weights)
        .map(|(s, w)| w * s)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The meta-detector's signed score of the row.
pub fn vote_stacking(row: &[f64], meta: &impl Detector) -> f64 {
    meta.score_row(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_examples() {
        assert!(vote_majority(&[1.0, 1.0, -1.0]) > 0.0);
        assert!(vote_majority(&[-0.5, -0.1, 0.9]) < 0.0);
        assert_eq!(vote_majority(&[0.9, 0.1, -0.8]), 0.5);
        // a zero vote is a normal vote
        assert!(vote_majority(&[0.0, 0.0, -0.4]) >= 0.0);
    }

    #[test]
    fn max_and_soft_examples() {
        assert_eq!(vote_max(&[-0.2, -0.9, 0.4]), 0.4);
        assert_eq!(vote_max(&[-0.9, 0.0, -0.2]), 0.0);
        assert_eq!(vote_max(&[-1.0, -1.0, -1.0]), -1.0);
        assert!((vote_soft(&[-0.6, -0.3, 0.3]) + 0.2).abs() < 1e-15);
        assert_eq!(vote_soft(&[1.0, 1.0, 1.0]), 1.0);
    }

    #[test]
    fn weighted_edge_cases() {
        let row = [-0.3, 0.2, -0.9];
        assert_eq!(vote_weighted(&row, &[1.0; 3]), vote_max(&row));
        assert_eq!(vote_weighted(&row, &[0.0; 3]), 0.0);
    }
}
