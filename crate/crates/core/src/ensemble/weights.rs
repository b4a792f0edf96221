// SPDX-License-Identifier: Apache-2.0

//! Per-detector weights for weighted voting.
//!
//! Each column of the score matrix is regressed on the other columns,
//! in-sample. The weight is the coefficient of determination clamped to
//! `[0, 1]`, or `max(0, 1 - RMSE)` for the RMSE learner (an OLS fit scored by
//! its residual size). A constant target column always gets weight 0.

use serde::{Deserialize, Serialize};

use super::ScoreMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "UPPERCASE")]
pub enum WeightLearner {
    Rmse,
    Ols,
    Ridge { lambda: f64 },
    Knn { k: usize },
}

impl WeightLearner {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightLearner::Ridge { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidParams(format!("ridge lambda {lambda} must be >= 0")))
            }
            WeightLearner::Knn { k: 0 } => Err(Error::InvalidParams("knn k must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightLearner::Rmse => "RMSE",
            WeightLearner::Ols => "OLS",
            WeightLearner::Ridge { .. } => "RIDGE",
            WeightLearner::Knn { .. } => "KNN",
        }
    }
}

/// Fit quality of one leave-one-column-out regression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnFit {
    pub sse: f64,
    /// Sum of squares of the target about its mean.
    pub sst: f64,
    pub n: usize,
}

impl ColumnFit {
    pub fn r_squared(&self) -> f64 {
        1.0 - self.sse / self.sst
    }

    pub fn rmse(&self) -> f64 {
        (self.sse / self.n as f64).sqrt()
    }
}

pub fn learn_weights(d: &ScoreMatrix, learner: &WeightLearner) -> Result<Vec<f64>> {
    learner.validate()?;
    if d.n_samples() < 2 {
        return Err(Error::DegenerateMatrix(format!(
            "weight learning needs at least 2 rows, got {}",
            d.n_samples()
        )));
    }
    (0..d.n_columns())
        .map(|k| {
            let fit = column_fit(d, k, learner);
            let w = if fit.sst <= 0.0 || is_constant(&d.column(k)) {
                0.0
            } else {
                match learner {
                    WeightLearner::Rmse => 1.0 - fit.rmse(),
                    _ => fit.r_squared(),
                }
            };
            Ok(w.clamp(0.0, 1.0))
        })
        .collect()
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// In-sample fit of column `target` from the remaining columns.
pub fn column_fit(d: &ScoreMatrix, target: usize, learner: &WeightLearner) -> ColumnFit {
    let n = d.n_samples();
    let y = d.column(target);
    let predictors: Vec<Vec<f64>> = (0..d.n_columns())
        .filter(|&j| j != target)
        .map(|j| d.column(j))
        .collect();
    let fitted = match *learner {
        WeightLearner::Rmse | WeightLearner::Ols => linear_fit(&predictors, &y, 0.0),
        WeightLearner::Ridge { lambda } => linear_fit(&predictors, &y, lambda),
        WeightLearner::Knn { k } => knn_fit(&predictors, &y, k),
    };
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    ColumnFit { sse, sst, n }
}

/// In-sample predictions of least squares with an unpenalized intercept and
/// an L2 penalty `lambda` on the slopes.
fn linear_fit(xs: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let p = xs.len();
    let means: Vec<f64> = xs.iter().map(|x| x.iter().sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // centred normal equations (S + lambda I) beta = c
    let mut s = vec![vec![0.0; p]; p];
    let mut c = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let v: f64 = (0..n).map(|i| (xs[a][i] - means[a]) * (xs[b][i] - means[b])).sum();
            s[a][b] = v;
            s[b][a] = v;
        }
        c[a] = (0..n).map(|i| (xs[a][i] - means[a]) * (y[i] - y_mean)).sum();
        s[a][a] += lambda;
    }
    let beta = solve_psd(s, c);
    (0..n)
        .map(|i| y_mean + (0..p).map(|a| beta[a] * (xs[a][i] - means[a])).sum::<f64>())
        .collect()
}

/// Solves a symmetric positive semi-definite system by Gauss-Jordan sweeps
/// on the diagonal. Pivots that have collapsed relative to their original
/// size (collinear predictors) are skipped and their coefficient left at 0,
/// which still yields a least-squares solution.
fn solve_psd(mut s: Vec<Vec<f64>>, mut c: Vec<f64>) -> Vec<f64> {
    let p = c.len();
    let scale: Vec<f64> = (0..p).map(|i| s[i][i]).collect();
    let mut active = vec![false; p];
    for i in 0..p {
        let pivot = s[i][i];
        if !(pivot > 1e-10 * scale[i]) || pivot <= 0.0 {
            continue;
        }
        active[i] = true;
        for r in 0..p {
            if r == i {
                continue;
            }
            let f = s[r][i] / pivot;
            if f == 0.0 {
                continue;
            }
            for col in 0..p {
                s[r][col] -= f * s[i][col];
            }
            c[r] -= f * c[i];
        }
    }
    (0..p).map(|i| if active[i] { c[i] / s[i][i] } else { 0.0 }).collect()
}

/// In-sample k-nearest-neighbour regression: the mean target of the `k`
/// nearest rows (Euclidean, the query row itself included, ties broken by
/// row index).
fn knn_fit(xs: &[Vec<f64>], y: &[f64], k: usize) -> Vec<f64> {
    let n = y.len();
    let k = k.min(n);
    let points: Vec<Vec<f64>> = (0..n).map(|i| xs.iter().map(|x| x[i]).collect()).collect();
    let tree = KdTree::build(&points);
    let mut heap = Vec::with_capacity(k + 1);
    (0..n)
        .map(|i| {
            tree.nearest(&points[i], k, &mut heap);
            heap.iter().map(|&(_, j)| y[j]).sum::<f64>() / k as f64
        })
        .collect()
}

const LEAF_SIZE: usize = 16;

enum KdNode {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Exact k-nearest-neighbour search ordered by `(squared distance, index)`.
pub(crate) struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl<'a> KdTree<'a> {
    pub(crate) fn build(points: &'a [Vec<f64>]) -> Self {
        let mut tree = Self { points, order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dims = self.points[0].len();
        let spread = |d: usize, order: &[usize]| {
            let (lo, hi) = order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(self.points[i][d]), hi.max(self.points[i][d]))
            });
            hi - lo
        };
        let dim = (0..dims)
            .max_by(|&a, &b| spread(a, &self.order).total_cmp(&spread(b, &self.order)))
            .unwrap_or(0);
        if spread(dim, &self.order) <= 0.0 {
            return id;
        }
        let mid = (start + end) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][dim].total_cmp(&points[b][dim])
        });
        let value = points[self.order[mid]][dim];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = KdNode::Split { dim, value, left, right };
        id
    }

    /// Fills `out` with the `k` nearest `(squared distance, index)` pairs in
    /// ascending order.
    pub(crate) fn nearest(&self, query: &[f64], k: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        if !self.nodes.is_empty() && k > 0 {
            self.search(0, query, k, out);
        }
    }

    fn search(&self, node: usize, query: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2: f64 = self.points[i].iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    let cand = (d2, i);
                    if best.len() == k && !less(cand, best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|&b| less(b, cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            KdNode::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, best);
                // points equal to the split value can sit on either side
                if best.len() < k || diff * diff <= best[k - 1].0 {
                    self.search(far, query, k, best);
                }
            }
        }
    }
}

fn less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[[f64; 3]]) -> ScoreMatrix {
        ScoreMatrix::new(rows.iter().flatten().copied().collect(), 3).unwrap()
    }

    #[test]
    fn identical_columns_get_full_weight() {
        let rows: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 / 20.0; 3]).collect();
        for learner in [WeightLearner::Ols, WeightLearner::Ridge { lambda: 0.0 }, WeightLearner::Rmse] {
            let w = learn_weights(&matrix(&rows), &learner).unwrap();
            for wk in w {
                assert!((wk - 1.0).abs() < 1e-12, "{learner:?}: {wk}");
            }
        }
    }

    #[test]
    fn constant_column_gets_zero() {
        let rows: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 / 20.0, 0.3, -(i as f64) / 40.0]).collect();
        for learner in [WeightLearner::Ols, WeightLearner::Rmse, WeightLearner::Knn { k: 5 }] {
            assert_eq!(learn_weights(&matrix(&rows), &learner).unwrap()[1], 0.0);
        }
    }

    #[test]
    fn too_few_rows() {
        let d = matrix(&[[0.1, 0.2, 0.3]]);
        assert!(matches!(learn_weights(&d, &WeightLearner::Ols), Err(Error::DegenerateMatrix(_))));
    }

    #[test]
    fn ridge_shrinks_toward_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<[f64; 3]> = (0..100)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                [a, 0.5 * a + rng.random_range(-0.1..0.1), rng.random_range(-1.0..1.0)]
            })
            .collect();
        let d = matrix(&rows);
        let ols = learn_weights(&d, &WeightLearner::Ols).unwrap();
        let ridge = learn_weights(&d, &WeightLearner::Ridge { lambda: 10.0 }).unwrap();
        for k in 0..3 {
            assert!(ridge[k] <= ols[k] + 1e-12);
        }
    }

    #[test]
    fn kd_tree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // coarse grid so distance ties are common
        let points: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.random_range(0..8) as f64, rng.random_range(0..8) as f64])
            .collect();
        let tree = KdTree::build(&points);
        let mut got = Vec::new();
        for (q, query) in points.iter().enumerate().step_by(7) {
            let mut all: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| ((p[0] - query[0]).powi(2) + (p[1] - query[1]).powi(2), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            tree.nearest(query, 9, &mut got);
            assert_eq!(got, all[..9].to_vec(), "query {q}");
        }
    }

    #[test]
    fn knn_weight_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<[f64; 3]> = (0..300)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let w = learn_weights(&matrix(&rows), &WeightLearner::Knn { k: 5 }).unwrap();
        assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
