// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major table of finite real-valued samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_samples: usize,
    n_features: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl FeatureMatrix {
    /// Builds a matrix with at least one row and one column.
    pub fn new(
        n_samples: usize,
        n_features: usize,
        values: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n_samples == 0 || n_features == 0 {
            return Err(Error::InvalidData(format!(
                "matrix must have at least one row and one column, got {n_samples}x{n_features}"
            )));
        }
        Self::build(n_samples, n_features, values, feature_names)
    }

    /// A matrix with zero rows; only useful as a scoring input.
    pub fn empty(feature_names: Vec<String>) -> Self {
        Self {
            n_samples: 0,
            n_features: feature_names.len(),
            values: Vec::new(),
            feature_names,
        }
    }

    /// Builds from rows, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::from_rows_named(rows, names)
    }

    pub fn from_rows_named(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_features, values, feature_names)
    }

    fn build(
        n_samples: usize,
        n_features: usize,
        values: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if values.len() != n_samples * n_features {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n_samples}x{n_features} matrix, got {}",
                n_samples * n_features,
                values.len()
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::InvalidData(format!(
                "expected {n_features} feature names, got {}",
                feature_names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Self {
            n_samples,
            n_features,
            values,
            feature_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty slice with n_features > 0 yields nothing
        self.values.chunks_exact(self.n_features.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_samples: indices.len(),
            n_features: self.n_features,
            values,
            feature_names: self.feature_names.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    /// Sign convention: `score >= 0` is normal.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Normal
        } else {
            Label::Anomaly
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }

    /// CSV encoding, 1 = anomaly.
    pub fn as_bit(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomaly => 1,
        }
    }
}

/// The seven injected anomaly scenarios of the simulated process.
///
/// | id | scenario            | violated constraint                         |
/// |----|---------------------|---------------------------------------------|
/// | 1  | stuck output        | one lamp per signal group                   |
/// | 2  | illegal greens      | never two conflicting greens                |
/// | 3  | dropped transition  | lamps agree with the cycle counter          |
/// | 4  | inverted input      | request bits clear while own group is green |
/// | 5  | premature skip      | lamps agree with the cycle counter          |
/// | 6  | timer freeze        | phase counter agrees with cycle counter     |
/// | 7  | timer jitter        | counters agree with lamps and each other    |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    StuckOutput,
    IllegalGreens,
    DroppedTransition,
    InvertedInput,
    PrematureSkip,
    TimerFreeze,
    TimerJitter,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::StuckOutput,
        Scenario::IllegalGreens,
        Scenario::DroppedTransition,
        Scenario::InvertedInput,
        Scenario::PrematureSkip,
        Scenario::TimerFreeze,
        Scenario::TimerJitter,
    ];

    /// 1-based identifier.
    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&s| s == self).unwrap() as u8 + 1
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    /// Scenarios 6 and 7 only touch the timing counters.
    pub fn is_timing(self) -> bool {
        matches!(self, Scenario::TimerFreeze | Scenario::TimerJitter)
    }
}

/// Samples with ground-truth labels and optional scenario tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub features: FeatureMatrix,
    pub labels: Vec<Label>,
    pub scenario_tags: Vec<Option<Scenario>>,
}

impl LabeledSet {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<Label>,
        scenario_tags: Vec<Option<Scenario>>,
    ) -> Result<Self> {
        let n = features.n_samples();
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: labels.len(),
            });
        }
        if scenario_tags.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: scenario_tags.len(),
            });
        }
        if let Some(i) = scenario_tags
            .iter()
            .zip(&labels)
            .position(|(tag, label)| tag.is_some() && *label != Label::Anomaly)
        {
            return Err(Error::InvalidData(format!(
                "sample {i} carries a scenario tag but is labeled normal"
            )));
        }
        Ok(Self {
            features,
            labels,
            scenario_tags,
        })
    }

    /// All samples labeled normal, no tags.
    pub fn unlabeled(features: FeatureMatrix) -> Self {
        let n = features.n_samples();
        Self {
            features,
            labels: vec![Label::Normal; n],
            scenario_tags: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_anomalies(&self) -> usize {
        self.labels.iter().filter(|l| l.is_anomaly()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(FeatureMatrix::new(1, 2, vec![0.0, f64::NAN], vec!["a".into(), "b".into()]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(FeatureMatrix::new(0, 1, vec![], vec!["a".into()]).is_err());
    }

    #[test]
    fn rows_and_columns() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0]);
        assert_eq!(m.rows().count(), 2);
        assert_eq!(FeatureMatrix::empty(vec!["a".into()]).rows().count(), 0);
    }

    #[test]
    fn scenario_ids_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_id(s.id()), Some(s));
        }
        assert_eq!(Scenario::from_id(0), None);
        assert_eq!(Scenario::from_id(8), None);
        assert!(Scenario::TimerFreeze.is_timing());
        assert!(!Scenario::StuckOutput.is_timing());
    }

    #[test]
    fn tagged_sample_must_be_anomalous() {
        let m = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        let err = LabeledSet::new(m, vec![Label::Normal], vec![Some(Scenario::StuckOutput)]);
        assert!(err.is_err());
    }

    #[test]
    fn zero_score_is_normal() {
        assert_eq!(Label::from_score(0.0), Label::Normal);
        assert_eq!(Label::from_score(-0.0), Label::Normal);
        assert_eq!(Label::from_score(-1e-300), Label::Anomaly);
    }
}
