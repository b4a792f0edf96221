// SPDX-License-Identifier: Apache-2.0

//! Base detectors behind one interface: fit on all-normal data, then emit a
//! signed decision score per sample (`>= 0` normal, `< 0` anomaly).

mod iforest;
mod ocnn;
mod ocsvm;

use serde::{Deserialize, Serialize};

pub use iforest::{
    average_path_length, fit_iforest, harmonic, measure_from_path, IforestModel, IforestParams,
    IsolationTree,
};
pub use ocnn::{fit_ocnn, OcnnModel, OcnnParams};
pub use ocsvm::{fit_ocsvm, OcsvmModel, OcsvmParams};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "OCSVM")]
    Ocsvm,
    #[serde(rename = "OCNN")]
    Ocnn,
    #[serde(rename = "IFOREST")]
    Iforest,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Ocsvm, DetectorKind::Ocnn, DetectorKind::Iforest];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ocsvm => "OCSVM",
            DetectorKind::Ocnn => "OCNN",
            DetectorKind::Iforest => "IFOREST",
        }
    }
}

/// Scoring side shared by all fitted detectors.
pub trait Detector {
    fn feature_count(&self) -> usize;

    /// Signed decision score of one row; `row.len()` must equal
    /// `feature_count()`.
    fn score_row(&self, row: &[f64]) -> f64;

    fn score(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        if data.n_features() != self.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count(),
                got: data.n_features(),
            });
        }
        Ok(data.rows().map(|r| self.score_row(r)).collect())
    }
}

/// Non-fatal conditions raised while fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitWarning {
    /// Solver stopped on its iteration budget with a KKT gap above ten times
    /// the tolerance.
    NonConvergence { residual: f64 },
    /// `max_samples` exceeded the training size and was reduced.
    MaxSamplesClamped { requested: usize, used: usize },
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWarning::NonConvergence { residual } => {
                write!(f, "solver did not converge (KKT gap {residual:.3e})")
            }
            FitWarning::MaxSamplesClamped { requested, used } => {
                write!(f, "max_samples {requested} exceeds training size, using {used}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state")]
pub enum TrainedDetector {
    #[serde(rename = "OCSVM")]
    Ocsvm(OcsvmModel),
    #[serde(rename = "OCNN")]
    Ocnn(OcnnModel),
    #[serde(rename = "IFOREST")]
    Iforest(IforestModel),
}

impl TrainedDetector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            TrainedDetector::Ocsvm(_) => DetectorKind::Ocsvm,
            TrainedDetector::Ocnn(_) => DetectorKind::Ocnn,
            TrainedDetector::Iforest(_) => DetectorKind::Iforest,
        }
    }

    fn inner(&self) -> &dyn Detector {
        match self {
            TrainedDetector::Ocsvm(m) => m,
            TrainedDetector::Ocnn(m) => m,
            TrainedDetector::Iforest(m) => m,
        }
    }
}

impl Detector for TrainedDetector {
    fn feature_count(&self) -> usize {
        self.inner().feature_count()
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        self.inner().score_row(row)
    }
}

/// Identifier written into every detector document.
pub const DETECTOR_FORMAT: &str = "ics-ensemble/detector";
/// Bumped on any incompatible change to a detector's fitted state.
pub const DETECTOR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DetectorDocument<D> {
    format: String,
    version: u32,
    detector: D,
}

impl TrainedDetector {
    /// Self-describing JSON document: format tag, version, kind, params and
    /// fitted arrays. Floats are written in shortest round-trip form.
    pub fn to_json(&self) -> String {
        let doc = DetectorDocument { format: DETECTOR_FORMAT.into(), version: DETECTOR_VERSION, detector: self };
        serde_json::to_string_pretty(&doc).expect("detector state is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DetectorDocument<TrainedDetector> =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        check_header(&doc.format, doc.version, DETECTOR_FORMAT, DETECTOR_VERSION)?;
        Ok(doc.detector)
    }
}

pub(crate) fn check_header(format: &str, version: u32, want_format: &str, want_version: u32) -> Result<()> {
    if format != want_format {
        return Err(Error::ModelFormat(format!("expected format {want_format:?}, found {format:?}")));
    }
    if version != want_version {
        return Err(Error::ModelFormat(format!("unsupported version {version} (this build reads {want_version})")));
    }
    Ok(())
}

/// A fitted detector plus whatever the fit had to say about itself.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub detector: TrainedDetector,
    pub warnings: Vec<FitWarning>,
}

pub fn fit_ocsvm_detector(train: &FeatureMatrix, params: &OcsvmParams) -> Result<Fitted> {
    let (model, warnings) = fit_ocsvm(train, params)?;
    Ok(Fitted { detector: TrainedDetector::Ocsvm(model), warnings })
}

pub fn fit_ocnn_detector(train: &FeatureMatrix, params: &OcnnParams) -> Result<Fitted> {
    let model = fit_ocnn(train, params)?;
    Ok(Fitted { detector: TrainedDetector::Ocnn(model), warnings: Vec::new() })
}

pub fn fit_iforest_detector(train: &FeatureMatrix, params: &IforestParams) -> Result<Fitted> {
    let (model, warnings) = fit_iforest(train, params)?;
    Ok(Fitted { detector: TrainedDetector::Iforest(model), warnings })
}

/// Scores every row of `data`.
pub fn score(detector: &TrainedDetector, data: &FeatureMatrix) -> Result<Vec<f64>> {
    detector.score(data)
}

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted values).
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.25), 1.25);
        assert_eq!(quantile(&[5.0], 0.9), 5.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
    }

    #[test]
    fn empty_matrix_scores_to_empty_vector() {
        let train = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let fitted = fit_iforest_detector(&train, &IforestParams { max_samples: 3, ..Default::default() }).unwrap();
        let empty = FeatureMatrix::empty(vec!["a".into(), "b".into()]);
        assert!(score(&fitted.detector, &empty).unwrap().is_empty());
    }

    #[test]
    fn document_round_trip_is_exact() {
        let train = FeatureMatrix::from_rows(&[vec![0.1, 1.0], vec![1.0, 0.3], vec![0.5, 0.7]]).unwrap();
        let fitted = fit_ocsvm_detector(&train, &OcsvmParams::default()).unwrap();
        let back = TrainedDetector::from_json(&fitted.detector.to_json()).unwrap();
        assert_eq!(back, fitted.detector);
    }

    #[test]
    fn document_rejects_other_versions() {
        let train = FeatureMatrix::from_rows(&[vec![0.1], vec![1.0]]).unwrap();
        let fitted = fit_iforest_detector(&train, &IforestParams::default()).unwrap();
        let text = fitted.detector.to_json().replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(TrainedDetector::from_json(&text), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let train = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let fitted = fit_ocsvm_detector(&train, &OcsvmParams::default()).unwrap();
        let wrong = FeatureMatrix::from_rows(&[vec![0.0, 1.0, 2.0]]).unwrap();
        assert!(matches!(
            score(&fitted.detector, &wrong),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }
}
