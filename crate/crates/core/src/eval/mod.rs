// SPDX-License-Identifier: Apache-2.0

//! Evaluation: confusion-matrix metrics, score histograms, one-way ANOVA and
//! multi-model comparison tables.

mod anova;
mod compare;
mod histogram;
mod metrics;

pub use anova::{anova_oneway, f_survival, ln_gamma, regularized_incomplete_beta, AnovaResult};
pub use compare::{compare_models, evaluate_all, replicate_seed, Comparison, MeanStd, ModelSummary};
pub use histogram::{bin_index, histogram_export, HistogramExport, DEFAULT_BINS, OUTCOMES};
pub use metrics::{confusion, evaluate_labels, metrics, ConfusionCounts, MetricsReport};
