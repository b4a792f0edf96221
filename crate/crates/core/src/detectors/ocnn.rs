// SPDX-License-Identifier: Apache-2.0

//! One-class neural network.
//!
//! A single hidden layer of Gaussian bumps with a linear output,
//! `y(x) = w . g(V z + b)` with `g(a) = exp(-a^2)` and `z` the input
//! standardized with training statistics. Training minimizes the one-class
//! objective
//!
//! ```text
//! 1/2 |w|^2 + 1/2 |V|^2 + 1/nu * mean(max(0, r - y(x))) - r
//! ```
//!
//! by full-batch gradient descent with `r` held fixed between updates; every
//! `quantile_update_every` epochs (and once more at the end) `r` is set to
//! the `nu` quantile of the outputs on the training set. The decision score
//! is `y(x) - r`.
//!
//! The bump vanishes away from the data and output weights start
//! nonnegative; the hinge term only ever pushes them up, so points far from
//! the training cloud fall below `r`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{quantile, Detector};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcnnParams {
    pub hidden_units: usize,
    pub nu: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub quantile_update_every: usize,
    pub rng_seed: u64,
}

impl Default for OcnnParams {
    fn default() -> Self {
        Self {
            hidden_units: 32,
            nu: 0.05,
            learning_rate: 1e-3,
            epochs: 200,
            quantile_update_every: 10,
            rng_seed: 0,
        }
    }
}

impl OcnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::InvalidParams("hidden_units must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParams(format!("nu {} outside (0, 1]", self.nu)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParams("learning_rate must be positive".into()));
        }
        if self.quantile_update_every == 0 {
            return Err(Error::InvalidParams("quantile_update_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcnnModel {
    pub params: OcnnParams,
    pub feature_count: usize,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Hidden weights, `hidden_units x feature_count`, row-major.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub r: f64,
}

impl OcnnModel {
    fn standardize(&self, row: &[f64], z: &mut [f64]) {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = (row[k] - self.input_mean[k]) / self.input_scale[k];
        }
    }

    fn pre_activations(&self, z: &[f64], pre: &mut [f64]) {
        let d = self.feature_count;
        for (u, p) in pre.iter_mut().enumerate() {
            let v = &self.hidden_weights[u * d..(u + 1) * d];
            *p = v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.hidden_bias[u];
        }
    }

    /// Network output `y(x)` before subtracting `r`.
    pub fn output(&self, row: &[f64]) -> f64 {
        let mut z = vec![0.0; self.feature_count];
        let mut pre = vec![0.0; self.params.hidden_units];
        self.standardize(row, &mut z);
        self.pre_activations(&z, &mut pre);
        self.output_weights.iter().zip(&pre).map(|(w, a)| w * activation(*a)).sum()
    }

    fn outputs(&self, data: &FeatureMatrix) -> Vec<f64> {
        data.rows().map(|r| self.output(r)).collect()
    }
}

pub fn fit_ocnn(train: &FeatureMatrix, params: &OcnnParams) -> Result<OcnnModel> {
    params.validate()?;
    let n = train.n_samples();
    if n < 2 {
        return Err(Error::InvalidData("one-class network needs at least 2 samples".into()));
    }
    let d = train.n_features();
    let hidden = params.hidden_units;

    let mut input_mean = vec![0.0; d];
    let mut input_scale = vec![0.0; d];
    for j in 0..d {
        let col = train.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        input_mean[j] = mean;
        input_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }

    let mut rng = rng_from_seed(params.rng_seed);
    let bound_in = 1.0 / (d as f64).sqrt();
    let bound_out = 1.0 / (hidden as f64).sqrt();
    let mut model = OcnnModel {
        params: params.clone(),
        feature_count: d,
        input_mean,
        input_scale,
        hidden_weights: (0..hidden * d).map(|_| rng.random_range(-bound_in..bound_in)).collect(),
        hidden_bias: (0..hidden).map(|_| rng.random_range(-bound_in..bound_in)).collect(),
        output_weights: (0..hidden).map(|_| rng.random_range(0.0..bound_out)).collect(),
        r: 0.0,
    };

    let mut standardized = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for row in train.rows() {
        model.standardize(row, &mut z);
        standardized.extend_from_slice(&z);
    }

    model.r = quantile(&model.outputs(train), params.nu);
    let hinge_slope = -1.0 / (params.nu * n as f64);
    let lr = params.learning_rate;
    let mut pre = vec![0.0; hidden];
    let mut g = vec![0.0; hidden];
    let mut grad_v = vec![0.0; hidden * d];
    let mut grad_b = vec![0.0; hidden];
    let mut grad_w = vec![0.0; hidden];

    for epoch in 0..params.epochs {
        grad_v.fill(0.0);
        grad_b.fill(0.0);
        grad_w.fill(0.0);
        for z in standardized.chunks_exact(d) {
            model.pre_activations(z, &mut pre);
            g.iter_mut().zip(&pre).for_each(|(g, a)| *g = activation(*a));
            let y: f64 = model.output_weights.iter().zip(&g).map(|(w, g)| w * g).sum();
            if y >= model.r {
                continue;
            }
            for u in 0..hidden {
                grad_w[u] += hinge_slope * g[u];
                let da = hinge_slope * model.output_weights[u] * activation_slope(pre[u], g[u]);
                grad_b[u] += da;
                for (gv, zk) in grad_v[u * d..(u + 1) * d].iter_mut().zip(z) {
                    *gv += da * zk;
                }
            }
        }

        for (p, gw) in model.output_weights.iter_mut().zip(&grad_w) {
            *p -= lr * (*p + gw);
        }
        for (p, gv) in model.hidden_weights.iter_mut().zip(&grad_v) {
            *p -= lr * (*p + gv);
        }
        for (p, gb) in model.hidden_bias.iter_mut().zip(&grad_b) {
            *p -= lr * gb;
        }
        if (epoch + 1) % params.quantile_update_every == 0 {
            model.r = quantile(&model.outputs(train), params.nu);
        }
    }
    model.r = quantile(&model.outputs(train), params.nu);
    Ok(model)
}

/// Gaussian bump `exp(-a^2)`.
fn activation(a: f64) -> f64 {
    (-a * a).exp()
}

/// Derivative of [`activation`] given the pre-activation and its value.
fn activation_slope(a: f64, g: f64) -> f64 {
    -2.0 * a * g
}

impl Detector for OcnnModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        self.output(row) - self.r
    }
}
