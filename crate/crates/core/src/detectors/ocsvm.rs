// SPDX-License-Identifier: Apache-2.0

//! One-class SVM with an RBF kernel, solved in the dual.
//!
//! ```text
//! min  1/2 a'Qa   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1
//! f(x) = sum_j a_j K(x_j, x) - rho
//! ```
//!
//! Identical training rows are merged into one point whose box bound is the
//! multiplicity times `1/(nu n)`; the merged problem has the same optimum.
//! The solver moves mass between the maximal violating pair (first-order
//! selection, lowest index on ties) until the KKT gap drops below the
//! tolerance or the iteration budget `max_passes * n_unique` runs out.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Detector, FitWarning};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcsvmParams {
    pub nu: f64,
    /// `None` selects `1 / n_features`.
    pub rbf_gamma: Option<f64>,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for OcsvmParams {
    fn default() -> Self {
        Self {
            nu: 0.05,
            rbf_gamma: None,
            tolerance: 1e-4,
            max_passes: 100,
        }
    }
}

impl OcsvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParams(format!("nu {} outside (0, 1]", self.nu)));
        }
        if let Some(g) = self.rbf_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParams(format!("rbf_gamma {g} must be positive")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams("tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParams("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub params: OcsvmParams,
    pub gamma: f64,
    pub rho: f64,
    pub n_train: usize,
    pub feature_count: usize,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    /// Dual coefficient of each (merged) support vector.
    pub coefficients: Vec<f64>,
    /// Number of identical training rows behind each support vector.
    pub multiplicity: Vec<usize>,
    /// Final KKT gap.
    pub kkt_gap: f64,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Kernel rows computed on demand, oldest evicted first.
struct KernelCache<'a> {
    points: &'a [f64],
    dim: usize,
    n: usize,
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

const CACHE_BYTES: usize = 256 << 20;

impl<'a> KernelCache<'a> {
    fn new(points: &'a [f64], dim: usize, gamma: f64) -> Self {
        let n = points.len() / dim;
        let capacity = (CACHE_BYTES / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            points,
            dim,
            n,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                let old = self.order.pop_front().unwrap();
                self.rows[old] = None;
            }
            let xi = self.point(i);
            let row: Box<[f64]> = (0..self.n).map(|j| rbf(self.gamma, xi, self.point(j))).collect();
            self.rows[i] = Some(row);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap()
    }
}

/// Merges identical rows, keeping first-occurrence order.
fn unique_rows(train: &FeatureMatrix) -> (Vec<f64>, Vec<usize>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut counts = Vec::new();
    for row in train.rows() {
        // -0.0 and 0.0 are the same point
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&k) => counts[k] += 1,
            None => {
                index.insert(key, counts.len());
                points.extend_from_slice(row);
                counts.push(1);
            }
        }
    }
    (points, counts)
}

pub fn fit_ocsvm(
    train: &FeatureMatrix,
    params: &OcsvmParams,
) -> Result<(OcsvmModel, Vec<FitWarning>)> {
    params.validate()?;
    let n_train = train.n_samples();
    if n_train < 2 {
        return Err(Error::InvalidData("one-class SVM needs at least 2 samples".into()));
    }
    let dim = train.n_features();
    let gamma = params.rbf_gamma.unwrap_or(1.0 / dim as f64);
    let (points, counts) = unique_rows(train);
    let n = counts.len();

    let unit = 1.0 / (params.nu * n_train as f64);
    let upper: Vec<f64> = counts.iter().map(|&m| (m as f64 * unit).min(1.0)).collect();

    // Feasible start: fill boxes in order until the mass reaches 1.
    let mut alpha = vec![0.0; n];
    let mut remaining = 1.0f64;
    for (a, &c) in alpha.iter_mut().zip(&upper) {
        if remaining <= 0.0 {
            break;
        }
        *a = c.min(remaining);
        remaining -= *a;
    }

    let mut cache = KernelCache::new(&points, dim, gamma);
    let mut grad = vec![0.0; n];
    for j in 0..n {
        if alpha[j] > 0.0 {
            let aj = alpha[j];
            for (g, k) in grad.iter_mut().zip(cache.row(j)) {
                *g += aj * k;
            }
        }
    }

    let budget = params.max_passes.saturating_mul(n);
    let mut gap = f64::INFINITY;
    for _ in 0..budget {
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for k in 0..n {
            if alpha[k] < upper[k] && up.is_none_or(|i| grad[k] < grad[i]) {
                up = Some(k);
            }
            if alpha[k] > 0.0 && down.is_none_or(|j| grad[k] > grad[j]) {
                down = Some(k);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            gap = 0.0;
            break;
        };
        gap = grad[j] - grad[i];
        if gap < params.tolerance {
            break;
        }

        let kij = cache.row(i)[j];
        let eta = (2.0 - 2.0 * kij).max(1e-12);
        let room_i = upper[i] - alpha[i];
        let room_j = alpha[j];
        let delta = (gap / eta).min(room_i).min(room_j);
        alpha[i] = if delta == room_i { upper[i] } else { alpha[i] + delta };
        alpha[j] = if delta == room_j { 0.0 } else { alpha[j] - delta };

        for (g, k) in grad.iter_mut().zip(cache.row(i)) {
            *g += delta * k;
        }
        for (g, k) in grad.iter_mut().zip(cache.row(j)) {
            *g -= delta * k;
        }
    }
    drop(cache);

    let mut warnings = Vec::new();
    if gap > 10.0 * params.tolerance {
        warnings.push(FitWarning::NonConvergence { residual: gap });
    }

    let sv: Vec<usize> = (0..n).filter(|&k| alpha[k] > 0.0).collect();
    let mut model = OcsvmModel {
        params: params.clone(),
        gamma,
        rho: 0.0,
        n_train,
        feature_count: dim,
        support: sv.iter().flat_map(|&k| points[k * dim..(k + 1) * dim].iter().copied()).collect(),
        coefficients: sv.iter().map(|&k| alpha[k]).collect(),
        multiplicity: sv.iter().map(|&k| counts[k]).collect(),
        kkt_gap: gap,
    };

    // rho from the same arithmetic used at scoring time. Free support vectors
    // sit on the boundary; taking the lowest of them keeps every one of them
    // on the normal side instead of splitting them by rounding noise.
    let exact: Vec<f64> = (0..n)
        .map(|k| model.kernel_sum(&points[k * dim..(k + 1) * dim]))
        .collect();
    let free_min = (0..n)
        .filter(|&k| alpha[k] > 0.0 && alpha[k] < upper[k])
        .map(|k| exact[k])
        .min_by(f64::total_cmp);
    model.rho = match free_min {
        Some(r) => r,
        None => {
            let at_upper = (0..n).filter(|&k| alpha[k] >= upper[k]).map(|k| exact[k]).max_by(f64::total_cmp);
            let at_zero = (0..n).filter(|&k| alpha[k] == 0.0).map(|k| exact[k]).min_by(f64::total_cmp);
            match (at_upper, at_zero) {
                (Some(lo), Some(hi)) => 0.5 * (lo + hi),
                (Some(v), None) | (None, Some(v)) => v,
                (None, None) => 0.0,
            }
        }
    };
    Ok((model, warnings))
}

impl OcsvmModel {
    fn kernel_sum(&self, row: &[f64]) -> f64 {
        self.support
            .chunks_exact(self.feature_count)
            .zip(&self.coefficients)
            .map(|(sv, a)| a * rbf(self.gamma, sv, row))
            .sum()
    }

    pub fn n_support(&self) -> usize {
        self.coefficients.len()
    }

    /// Dual coefficient per original training row, i.e. the merged
    /// coefficient split evenly over its duplicates.
    pub fn per_row_coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.coefficients
            .iter()
            .zip(&self.multiplicity)
            .map(|(a, &m)| a / m as f64)
    }
}

impl Detector for OcsvmModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        self.kernel_sum(row) - self.rho
    }
}
