// SPDX-License-Identifier: Apache-2.0

//! Ensembles of the three base detectors.
//!
//! Fitting scores the training data with every detector, stores each
//! detector's training-score range, normalizes the scores into a matrix `D`
//! (one column per detector) and fits whatever the voting strategy needs on
//! `D`: regression weights for weighted voting, a meta isolation forest for
//! stacking. Prediction normalizes test scores with the stored ranges and
//! applies the voting function row by row; a final score `< 0` is an anomaly.

mod normalize;
mod voting;
mod weights;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use normalize::{normalize_scores, FeatureRange, RANGE_EPS};
pub use voting::{vote_majority, vote_max, vote_soft, vote_stacking, vote_weighted};
pub use weights::{column_fit, learn_weights, ColumnFit, WeightLearner, DEFAULT_KNN_K, DEFAULT_RIDGE_LAMBDA};

use crate::dataset::{FeatureMatrix, Label};
use crate::detectors::{
    check_header, fit_iforest, fit_iforest_detector, fit_ocnn_detector, fit_ocsvm_detector, Detector,
    DetectorKind, FitWarning, IforestModel, IforestParams, OcnnParams, OcsvmParams, TrainedDetector,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Normalized detector scores, one column per detector, entries in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    n_columns: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(values: Vec<f64>, n_columns: usize) -> Result<Self> {
        if n_columns == 0 || !values.len().is_multiple_of(n_columns) {
            return Err(Error::InvalidData(format!(
                "{} values do not fill rows of {n_columns} columns",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("normalized score {v} outside [-1, 1]")));
        }
        Ok(Self { n_columns, values })
    }

    /// Normalizes per-detector raw score columns with their ranges.
    pub fn from_raw(raw_columns: &[Vec<f64>], ranges: &[FeatureRange]) -> Result<Self> {
        if raw_columns.len() != ranges.len() || raw_columns.is_empty() {
            return Err(Error::LengthMismatch { left: raw_columns.len(), right: ranges.len() });
        }
        let n = raw_columns[0].len();
        let normalized: Vec<Vec<f64>> =
            raw_columns.iter().zip(ranges).map(|(c, r)| normalize_scores(c, r)).collect();
        let mut values = Vec::with_capacity(n * ranges.len());
        for i in 0..n {
            values.extend(normalized.iter().map(|c| c[i]));
        }
        Self::new(values, ranges.len())
    }

    pub fn n_samples(&self) -> usize {
        self.values.len() / self.n_columns
    }

    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_columns..(i + 1) * self.n_columns]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_columns)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// The same values as a feature matrix, e.g. to train a meta-detector.
    pub fn to_feature_matrix(&self) -> Result<FeatureMatrix> {
        let names = DetectorKind::ALL.iter().map(|k| k.name().to_string()).collect::<Vec<_>>();
        let names = if names.len() == self.n_columns {
            names
        } else {
            (0..self.n_columns).map(|j| format!("s{j}")).collect()
        };
        FeatureMatrix::new(self.n_samples(), self.n_columns, self.values.clone(), names)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "UPPERCASE")]
pub enum VotingStrategy {
    Majority,
    #[serde(rename = "MAXSCORE")]
    MaxScore,
    Soft,
    Weighted { learner: WeightLearner },
    Stacking { meta: IforestParams },
}

impl VotingStrategy {
    /// Stacking with the meta forest at its defaults (100 trees, 256
    /// samples, contamination 0.007).
    pub fn stacking(seed: u64) -> Self {
        VotingStrategy::Stacking {
            meta: IforestParams { rng_seed: derive_seed(seed, "ensemble/meta"), ..Default::default() },
        }
    }

    /// Every strategy with default settings: the three plain votes, the four
    /// weighted learners, and stacking.
    pub fn all(seed: u64) -> Vec<Self> {
        vec![
            VotingStrategy::Majority,
            VotingStrategy::MaxScore,
            VotingStrategy::Soft,
            VotingStrategy::Weighted { learner: WeightLearner::Rmse },
            VotingStrategy::Weighted { learner: WeightLearner::Ols },
            VotingStrategy::Weighted { learner: WeightLearner::Ridge { lambda: DEFAULT_RIDGE_LAMBDA } },
            VotingStrategy::Weighted { learner: WeightLearner::Knn { k: DEFAULT_KNN_K } },
            VotingStrategy::stacking(seed),
        ]
    }

    pub fn label(&self) -> String {
        match self {
            VotingStrategy::Majority => "MAJORITY".into(),
            VotingStrategy::MaxScore => "MAXSCORE".into(),
            VotingStrategy::Soft => "SOFT".into(),
            VotingStrategy::Weighted { learner } => format!("WV-{}", learner.name()),
            VotingStrategy::Stacking { .. } => "STACKING".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VotingStrategy::Weighted { learner } => learner.validate(),
            VotingStrategy::Stacking { meta } => meta.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategyState {
    None,
    Weights { weights: Vec<f64> },
    Meta { meta: IforestModel },
}

/// Parameters of the three base detectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub ocsvm: OcsvmParams,
    pub ocnn: OcnnParams,
    pub iforest: IforestParams,
}

impl DetectorParams {
    /// Defaults with every random component seeded from `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut p = Self::default();
        p.reseed(seed);
        p
    }

    pub fn reseed(&mut self, seed: u64) {
        self.ocnn.rng_seed = derive_seed(seed, "detector/ocnn");
        self.iforest.rng_seed = derive_seed(seed, "detector/iforest");
    }
}

/// Fitted base detectors and the normalized training score matrix, shared by
/// every strategy fitted on the same data.
#[derive(Clone, Debug)]
pub struct BaseFit {
    pub detectors: Vec<TrainedDetector>,
    pub ranges: Vec<FeatureRange>,
    pub raw_scores: Vec<Vec<f64>>,
    pub train_scores: ScoreMatrix,
    pub warnings: Vec<(DetectorKind, FitWarning)>,
}

pub fn fit_base(train: &FeatureMatrix, params: &DetectorParams) -> Result<BaseFit> {
    let fits = [
        fit_ocsvm_detector(train, &params.ocsvm)?,
        fit_ocnn_detector(train, &params.ocnn)?,
        fit_iforest_detector(train, &params.iforest)?,
    ];
    let mut warnings = Vec::new();
    let mut detectors = Vec::new();
    let mut raw_scores = Vec::new();
    let mut ranges = Vec::new();
    for fit in fits {
        warnings.extend(fit.warnings.into_iter().map(|w| (fit.detector.kind(), w)));
        let raw = fit.detector.score(train)?;
        ranges.push(FeatureRange::from_scores(&raw)?);
        raw_scores.push(raw);
        detectors.push(fit.detector);
    }
    let train_scores = ScoreMatrix::from_raw(&raw_scores, &ranges)?;
    Ok(BaseFit { detectors, ranges, raw_scores, train_scores, warnings })
}

impl BaseFit {
    /// Fits the strategy state on the shared training score matrix.
    pub fn with_strategy(&self, strategy: &VotingStrategy) -> Result<(EnsembleModel, Vec<FitWarning>)> {
        strategy.validate()?;
        let mut warnings = Vec::new();
        let state = match strategy {
            VotingStrategy::Majority | VotingStrategy::MaxScore | VotingStrategy::Soft => StrategyState::None,
            VotingStrategy::Weighted { learner } => StrategyState::Weights {
                weights: learn_weights(&self.train_scores, learner)?,
            },
            VotingStrategy::Stacking { meta } => {
                let (model, w) = fit_iforest(&self.train_scores.to_feature_matrix()?, meta)?;
                warnings.extend(w);
                StrategyState::Meta { meta: model }
            }
        };
        let model = EnsembleModel {
            detectors: self.detectors.clone(),
            ranges: self.ranges.clone(),
            strategy: strategy.clone(),
            state,
        };
        Ok((model, warnings))
    }
}

/// Fits the base detectors and the strategy. Warnings from every fit are
/// returned alongside the model.
pub fn fit_ensemble(
    train: &FeatureMatrix,
    strategy: &VotingStrategy,
    params: &DetectorParams,
) -> Result<(EnsembleModel, Vec<FitWarning>)> {
    strategy.validate()?;
    let base = fit_base(train, params)?;
    let (model, meta_warnings) = base.with_strategy(strategy)?;
    let mut warnings: Vec<FitWarning> = base.warnings.into_iter().map(|(_, w)| w).collect();
    warnings.extend(meta_warnings);
    Ok((model, warnings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub detectors: Vec<TrainedDetector>,
    pub ranges: Vec<FeatureRange>,
    pub strategy: VotingStrategy,
    pub state: StrategyState,
}

/// Final ensemble decision per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
}

impl EnsembleModel {
    pub fn feature_count(&self) -> usize {
        self.detectors[0].feature_count()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match &self.state {
            StrategyState::Weights { weights } => Some(weights),
            _ => None,
        }
    }

    /// Normalized per-detector scores of `data`.
    pub fn score_matrix(&self, data: &FeatureMatrix) -> Result<ScoreMatrix> {
        let raw = self
            .detectors
            .iter()
            .map(|d| d.score(data))
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::from_raw(&raw, &self.ranges)
    }

    /// Final score of one normalized row.
    pub fn vote(&self, row: &[f64]) -> f64 {
        match (&self.strategy, &self.state) {
            (VotingStrategy::Majority, _) => vote_majority(row),
            (VotingStrategy::MaxScore, _) => vote_max(row),
            (VotingStrategy::Soft, _) => vote_soft(row),
            (VotingStrategy::Weighted { .. }, StrategyState::Weights { weights }) => vote_weighted(row, weights),
            (VotingStrategy::Stacking { .. }, StrategyState::Meta { meta }) => vote_stacking(row, meta),
            _ => unreachable!("strategy state checked at construction"),
        }
    }

    pub fn predict_scores(&self, scores: &ScoreMatrix) -> Prediction {
        let scores: Vec<f64> = scores.rows().map(|r| self.vote(r)).collect();
        let labels = scores.iter().map(|&s| Label::from_score(s)).collect();
        Prediction { labels, scores }
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            detectors: self.detectors.iter().map(DetectorEntry::from).collect(),
            ranges: self.ranges.clone(),
            strategy: self.strategy.clone(),
            state: self.state.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model state is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        check_header(&doc.format, doc.version, MODEL_FORMAT, MODEL_VERSION)?;
        let detectors = doc
            .detectors
            .into_iter()
            .map(|d| {
                check_header(&d.format, d.version, crate::detectors::DETECTOR_FORMAT, crate::detectors::DETECTOR_VERSION)?;
                Ok(d.detector)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Self { detectors, ranges: doc.ranges, strategy: doc.strategy, state: doc.state };
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        let kinds: Vec<DetectorKind> = self.detectors.iter().map(TrainedDetector::kind).collect();
        if kinds != DetectorKind::ALL {
            return bad(format!("expected detectors OCSVM, OCNN, IFOREST, found {kinds:?}"));
        }
        let d = self.detectors[0].feature_count();
        if self.detectors.iter().any(|det| det.feature_count() != d) {
            return bad("detectors disagree on the feature count".into());
        }
        if self.ranges.len() != self.detectors.len() {
            return bad(format!("{} ranges for {} detectors", self.ranges.len(), self.detectors.len()));
        }
        for r in &self.ranges {
            FeatureRange::new(r.min, r.max).map_err(|e| Error::ModelFormat(e.to_string()))?;
        }
        self.strategy.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
        match (&self.strategy, &self.state) {
            (VotingStrategy::Majority | VotingStrategy::MaxScore | VotingStrategy::Soft, StrategyState::None) => Ok(()),
            (VotingStrategy::Weighted { .. }, StrategyState::Weights { weights }) => {
                if weights.len() != self.detectors.len() || weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return bad(format!("weights {weights:?} must be {} values in [0, 1]", self.detectors.len()));
                }
                Ok(())
            }
            (VotingStrategy::Stacking { .. }, StrategyState::Meta { meta }) => {
                if meta.feature_count != self.detectors.len() {
                    return bad(format!("meta-detector expects {} inputs", meta.feature_count));
                }
                Ok(())
            }
            _ => bad(format!("state does not match strategy {}", self.strategy.label())),
        }
    }
}

pub fn predict_ensemble(model: &EnsembleModel, data: &FeatureMatrix) -> Result<Prediction> {
    Ok(model.predict_scores(&model.score_matrix(data)?))
}

pub const MODEL_FORMAT: &str = "ics-ensemble/model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    detectors: Vec<DetectorEntry>,
    ranges: Vec<FeatureRange>,
    strategy: VotingStrategy,
    state: StrategyState,
}

/// A detector document embedded in the model container.
#[derive(Serialize, Deserialize)]
struct DetectorEntry {
    format: String,
    version: u32,
    detector: TrainedDetector,
}

impl From<&TrainedDetector> for DetectorEntry {
    fn from(d: &TrainedDetector) -> Self {
        Self {
            format: crate::detectors::DETECTOR_FORMAT.into(),
            version: crate::detectors::DETECTOR_VERSION,
            detector: d.clone(),
        }
    }
}
