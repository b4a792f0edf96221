// SPDX-License-Identifier: Apache-2.0

//! Isolation forest.
//!
//! Trees are grown on uniform subsamples (without replacement) of
//! `max_samples` rows up to a height limit of `ceil(log2(max_samples))`.
//! Each split draws an attribute uniformly among those that are not constant
//! in the node and a threshold uniformly in the node's `(min, max)` range on
//! it. Nodes whose rows are all identical become leaves.
//!
//! The anomaly measure is `a(x) = 2^(-E[h(x)] / c(psi))`. It is turned into a
//! signed decision score `threshold - a(x)`, where `threshold` is the
//! `(1 - contamination)` quantile of `a` over the training rows.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{quantile, Detector, FitWarning};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IforestParams {
    pub n_estimators: usize,
    pub max_samples: usize,
    pub contamination: f64,
    pub rng_seed: u64,
}

impl Default for IforestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_samples: 256,
            contamination: 0.007,
            rng_seed: 0,
        }
    }
}

impl IforestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParams("n_estimators must be at least 1".into()));
        }
        if self.max_samples < 2 {
            return Err(Error::InvalidParams("max_samples must be at least 2".into()));
        }
        if !(self.contamination > 0.0 && self.contamination < 0.5) {
            return Err(Error::InvalidParams(format!(
                "contamination {} outside (0, 0.5)",
                self.contamination
            )));
        }
        Ok(())
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Harmonic number `H(m) = 1 + 1/2 + ... + 1/m`.
pub fn harmonic(m: usize) -> f64 {
    if m < 64 {
        // exact summation, smallest terms first
        return (1..=m).rev().map(|k| 1.0 / k as f64).sum();
    }
    let x = m as f64;
    let inv2 = 1.0 / (x * x);
    x.ln() + EULER_GAMMA + 0.5 / x
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)))
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points: `c(n) = 2 H(n - 1) - 2 (n - 1) / n`, with `c(0) = c(1) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn grow(
        data: &FeatureMatrix,
        sample: Vec<usize>,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow_node(data, sample, 0, height_limit, rng);
        tree
    }

    fn grow_node(
        &mut self,
        data: &FeatureMatrix,
        rows: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= height_limit || rows.len() <= 1 {
            return id;
        }

        let ranges: Vec<(usize, f64, f64)> = (0..data.n_features())
            .filter_map(|j| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = data.row(i)[j];
                    (lo.min(v), hi.max(v))
                });
                (lo < hi).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }

        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let threshold = loop {
            let t = rng.random_range(lo..hi);
            if t > lo {
                break t;
            }
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| data.row(i)[feature] < threshold);

        let left = self.grow_node(data, left_rows, depth + 1, height_limit, rng);
        let right = self.grow_node(data, right_rows, depth + 1, height_limit, rng);
        self.nodes[id as usize] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// `h(x)`: edges traversed plus `c(size)` for the leaf reached.
    pub fn path_length(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *threshold { *left } else { *right } as usize;
                    depth += 1;
                }
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IforestModel {
    pub params: IforestParams,
    /// Rows per tree after clamping to the training size.
    pub subsample_size: usize,
    /// `c(subsample_size)`.
    pub path_norm: f64,
    /// `(1 - contamination)` quantile of the training anomaly measures.
    pub threshold: f64,
    pub feature_count: usize,
    pub trees: Vec<IsolationTree>,
}

pub fn fit_iforest(
    train: &FeatureMatrix,
    params: &IforestParams,
) -> Result<(IforestModel, Vec<FitWarning>)> {
    params.validate()?;
    let n = train.n_samples();
    if n < 2 {
        return Err(Error::InvalidData("isolation forest needs at least 2 samples".into()));
    }
    let mut warnings = Vec::new();
    let psi = if params.max_samples > n {
        warnings.push(FitWarning::MaxSamplesClamped {
            requested: params.max_samples,
            used: n,
        });
        n
    } else {
        params.max_samples
    };
    let height_limit = (psi as f64).log2().ceil() as usize;

    let mut rng = rng_from_seed(params.rng_seed);
    let trees = (0..params.n_estimators)
        .map(|_| {
            let sample = index::sample(&mut rng, n, psi).into_vec();
            IsolationTree::grow(train, sample, height_limit, &mut rng)
        })
        .collect();

    let mut model = IforestModel {
        params: params.clone(),
        subsample_size: psi,
        path_norm: average_path_length(psi),
        threshold: 0.0,
        feature_count: train.n_features(),
        trees,
    };
    let measures: Vec<f64> = train.rows().map(|r| model.anomaly_measure(r)).collect();
    model.threshold = quantile(&measures, 1.0 - params.contamination);
    Ok((model, warnings))
}

impl IforestModel {
    pub fn mean_path_length(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(row)).sum();
        total / self.trees.len() as f64
    }

    /// `a(x)` in `(0, 1)`; larger is more anomalous.
    pub fn anomaly_measure(&self, row: &[f64]) -> f64 {
        measure_from_path(self.mean_path_length(row), self.path_norm)
    }
}

pub fn measure_from_path(mean_path: f64, path_norm: f64) -> f64 {
    (-mean_path / path_norm).exp2()
}

impl Detector for IforestModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        self.threshold - self.anomaly_measure(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_longhand(m: usize) -> f64 {
        // Kahan-compensated forward sum
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=m {
            let y = 1.0 / k as f64 - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn c_of_two_is_one() {
        assert_eq!(average_path_length(2), 1.0);
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(0), 0.0);
    }

    #[test]
    fn harmonic_matches_longhand() {
        for m in [1, 2, 10, 63, 64, 65, 100, 255, 1000, 12345] {
            let diff = (harmonic(m) - harmonic_longhand(m)).abs();
            assert!(diff < 1e-13, "m={m}: {diff}");
        }
    }

    fn grid(n: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 17) as f64, (i / 17) as f64]).collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn trees_respect_height_limit() {
        let params = IforestParams { n_estimators: 20, max_samples: 100, ..Default::default() };
        let (model, warnings) = fit_iforest(&grid(300), &params).unwrap();
        assert!(warnings.is_empty());
        let limit = (100f64).log2().ceil() as usize;
        assert!(model.trees.iter().all(|t| t.depth() <= limit));
    }

    #[test]
    fn clamps_oversized_subsample() {
        let (model, warnings) = fit_iforest(&grid(50), &IforestParams::default()).unwrap();
        assert_eq!(model.subsample_size, 50);
        assert_eq!(warnings, vec![FitWarning::MaxSamplesClamped { requested: 256, used: 50 }]);
    }

    #[test]
    fn constant_data_yields_single_leaf() {
        let rows = vec![vec![3.0, 3.0]; 40];
        let data = FeatureMatrix::from_rows(&rows).unwrap();
        let params = IforestParams { n_estimators: 5, max_samples: 16, ..Default::default() };
        let (model, _) = fit_iforest(&data, &params).unwrap();
        assert!(model.trees.iter().all(|t| t.depth() == 0));
        // every point sits in the root leaf: E[h] = c(16), a = 1/2
        assert_eq!(model.anomaly_measure(&[3.0, 3.0]), 0.5);
        assert_eq!(model.score_row(&[3.0, 3.0]), 0.0);
    }

    #[test]
    fn measure_decreases_with_depth() {
        let norm = average_path_length(256);
        let mut prev = measure_from_path(0.0, norm);
        assert_eq!(prev, 1.0);
        for d in 1..20 {
            let a = measure_from_path(d as f64, norm);
            assert!(a < prev && a > 0.0);
            prev = a;
        }
        assert_eq!(measure_from_path(norm, norm), 0.5);
    }

    #[test]
    fn invalid_params() {
        let data = grid(10);
        for bad in [
            IforestParams { n_estimators: 0, ..Default::default() },
            IforestParams { max_samples: 1, ..Default::default() },
            IforestParams { contamination: 0.0, ..Default::default() },
            IforestParams { contamination: 0.5, ..Default::default() },
        ] {
            assert!(matches!(fit_iforest(&data, &bad), Err(Error::InvalidParams(_))));
        }
    }
}
