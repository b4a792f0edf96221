// SPDX-License-Identifier: Apache-2.0

//! Multi-model comparison over regenerated test replicates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::anova::{anova_oneway, AnovaResult};
use super::metrics::{evaluate_labels, MetricsReport};
use crate::dataset::{simulate_tlight, LabeledSet, TestSetSpec};
use crate::ensemble::{EnsembleModel, ScoreMatrix};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// F1 of every (set spec, replicate) cell, spec-major.
    pub f1_samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub models: Vec<ModelSummary>,
    pub replicates_per_spec: usize,
    pub n_specs: usize,
    /// One-way ANOVA across models over their per-cell F1 scores.
    pub anova: AnovaResult,
}

/// Seed of replicate `r` of a test-set spec.
pub fn replicate_seed(rng_seed: u64, spec: &TestSetSpec, r: usize) -> u64 {
    derive_seed(rng_seed, &format!("compare/{}/{r}", spec.name))
}

/// Evaluates every model on `resamples` freshly generated replicates of each
/// spec and compares their F1 samples with a one-way ANOVA.
pub fn compare_models(
    models: &[(String, EnsembleModel)],
    specs: &[TestSetSpec],
    resamples: usize,
    rng_seed: u64,
) -> Result<Comparison> {
    if resamples < 2 {
        return Err(Error::InvalidParams(format!("resamples must be at least 2, got {resamples}")));
    }
    if models.len() < 2 {
        return Err(Error::DegenerateGroups(format!("need at least 2 models, got {}", models.len())));
    }
    if specs.is_empty() {
        return Err(Error::InvalidParams("no test-set specs given".into()));
    }
    let mut reports: Vec<Vec<MetricsReport>> = vec![Vec::new(); models.len()];
    for spec in specs {
        for r in 0..resamples {
            let set = simulate_tlight(&spec.sim_config(replicate_seed(rng_seed, spec, r)))?;
            for (i, m) in evaluate_all(models, &set)?.into_iter().enumerate() {
                reports[i].push(m);
            }
        }
    }
    let summaries: Vec<ModelSummary> = models
        .iter()
        .zip(&reports)
        .map(|((name, _), reps)| {
            let pick = |f: fn(&MetricsReport) -> f64| reps.iter().map(f).collect::<Vec<_>>();
            let f1_samples = pick(|m| m.f1);
            ModelSummary {
                name: name.clone(),
                accuracy: MeanStd::of(&pick(|m| m.accuracy)),
                precision: MeanStd::of(&pick(|m| m.precision)),
                recall: MeanStd::of(&pick(|m| m.recall)),
                f1: MeanStd::of(&f1_samples),
                f1_samples,
            }
        })
        .collect();
    let groups: Vec<Vec<f64>> = summaries.iter().map(|s| s.f1_samples.clone()).collect();
    Ok(Comparison {
        models: summaries,
        replicates_per_spec: resamples,
        n_specs: specs.len(),
        anova: anova_oneway(&groups)?,
    })
}

/// Metrics of every model on one labeled set. Models sharing the same base
/// detectors and ranges reuse one score matrix.
pub fn evaluate_all(models: &[(String, EnsembleModel)], set: &LabeledSet) -> Result<Vec<MetricsReport>> {
    let mut cache: Vec<(usize, ScoreMatrix)> = Vec::new();
    models
        .iter()
        .enumerate()
        .map(|(i, (_, model))| {
            let cached = cache.iter().find(|(j, _)| {
                let other = &models[*j].1;
                other.detectors == model.detectors && other.ranges == model.ranges
            });
            let scores = match cached {
                Some((_, s)) => s.clone(),
                None => {
                    let s = model.score_matrix(&set.features)?;
                    cache.push((i, s.clone()));
                    s
                }
            };
            evaluate_labels(&set.labels, &model.predict_scores(&scores).labels)
        })
        .collect()
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "model", "accuracy_mean", "accuracy_std", "precision_mean", "precision_std", "recall_mean",
            "recall_std", "f1_mean", "f1_std",
        ])
        .map_err(io)?;
        for m in &self.models {
            let mut rec = vec![m.name.clone()];
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                rec.push(v.mean.to_string());
                rec.push(v.std.to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned table followed by the ANOVA line.
    pub fn to_text(&self) -> String {
        let width = self.models.iter().map(|m| m.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}", "model");
        for h in ["Accuracy", "Precision", "Recall", "F1"] {
            out += &format!("  {:>17}", format!("{h} mean/std"));
        }
        out.push('\n');
        for m in &self.models {
            out += &format!("{:<width$}", m.name);
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                out += &format!("  {:>8.4} {:>8.4}", v.mean, v.std);
            }
            out.push('\n');
        }
        out += &format!(
            "replicates: {} per spec x {} specs\nF={:.6}, p={:.6e} (df {}, {})\n",
            self.replicates_per_spec,
            self.n_specs,
            self.anova.f_value,
            self.anova.p_value,
            self.anova.df_between,
            self.anova.df_within
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
