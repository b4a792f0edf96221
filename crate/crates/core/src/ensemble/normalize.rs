// SPDX-License-Identifier: Apache-2.0

//! Sign-preserving two-sided min-max normalization.
//!
//! Positive raw scores map onto `[0, 1]` through `(0, max(range.max, eps))`
//! and negative ones onto `[-1, 0)` through `(min(range.min, -eps), 0)`, so
//! the sign (the class decision) survives. Test-time scores outside the
//! training range are clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard against division by a vanishing side of the range.
pub const RANGE_EPS: f64 = 1e-12;

/// Per-detector training-score range, persisted with the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(Error::InvalidParams(format!("invalid score range ({min}, {max})")));
        }
        Ok(Self { min, max })
    }

    /// Range of a nonempty vector of finite scores.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidData("cannot take the range of no scores".into()));
        }
        let (min, max) = scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        Self::new(min, max)
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        let v = if raw > 0.0 {
            raw / self.max.max(RANGE_EPS)
        } else if raw < 0.0 {
            raw / -self.min.min(-RANGE_EPS)
        } else {
            0.0
        };
        v.clamp(-1.0, 1.0)
    }
}

pub fn normalize_scores(raw: &[f64], range: &FeatureRange) -> Vec<f64> {
    raw.iter().map(|&s| range.normalize(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_endpoints_and_clamp() {
        let r = FeatureRange::new(0.0, 10.0).unwrap();
        assert_eq!(normalize_scores(&[0.0, 5.0, 10.0], &r), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_scores(&[20.0], &r), vec![1.0]);
        let r = FeatureRange::new(-8.0, 10.0).unwrap();
        assert_eq!(normalize_scores(&[-4.0], &r), vec![-0.5]);
    }

    #[test]
    fn negative_scores_stay_negative_without_negative_training_range() {
        let r = FeatureRange::new(0.5, 2.0).unwrap();
        assert_eq!(r.normalize(-1e-3), -1.0);
        assert!(r.normalize(-1e-14) < 0.0);
    }

    #[test]
    fn all_zero_range_gives_zero() {
        let r = FeatureRange::from_scores(&[0.0, 0.0]).unwrap();
        assert_eq!(normalize_scores(&[0.0, 0.0], &r), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_inverted_range() {
        assert!(FeatureRange::new(1.0, 0.0).is_err());
        assert!(FeatureRange::from_scores(&[]).is_err());
    }
}
