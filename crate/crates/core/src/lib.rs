// SPDX-License-Identifier: Apache-2.0

//! Unsupervised ensemble anomaly detection for PLC process telemetry.
//!
//! Three base detectors (one-class SVM, one-class neural network and
//! isolation forest) are fitted on all-normal data. Their signed decision
//! scores are normalized with persisted per-detector ranges and combined by
//! one of five voting strategies: majority vote, maximum score, soft voting,
//! regression-weighted voting and isolation-forest stacking.
//!
//! Sign convention everywhere: a score `>= 0` means normal, `< 0` anomaly.

pub mod cli;
pub mod dataset;
pub mod detectors;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod kvconfig;
pub mod seed;

pub use dataset::{FeatureMatrix, Label, LabeledSet, Scenario, SimConfig};
pub use detectors::{DetectorKind, IforestParams, OcnnParams, OcsvmParams, TrainedDetector};
pub use ensemble::{EnsembleModel, FeatureRange, VotingStrategy, WeightLearner};
pub use error::{Error, Result};
pub use eval::{AnovaResult, ConfusionCounts, HistogramExport, MetricsReport};
