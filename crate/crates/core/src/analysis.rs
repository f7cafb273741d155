//! Layer analysis: distribution statistics of every layer's weights and of
//! its activations over a calibration batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::{check_input, QuantPlan};
use crate::network::Network;
use crate::quant::{fit_fl, il_for_max_abs, NetworkQuantConfig, Target};
use crate::tensor::Tensor;

/// Calibration batch size used when none is given.
pub const DEFAULT_BATCH_SIZE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionStats {
    pub layer_id: String,
    pub target: Target,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    /// Bit width the suggested FL was computed for.
    pub bw: u8,
    pub suggested_il: i32,
    pub suggested_fl: i32,
    pub sample_count: u64,
}

impl DistributionStats {
    /// Stats from known moments, with no layer attached.
    pub fn from_moments(min: f64, max: f64, mean: f64, std: f64) -> Self {
        let mut acc = RunningStats::default();
        acc.push(min);
        acc.push(max);
        let mut s = acc.finish("", Target::Weights, 32, 32);
        s.mean = mean;
        s.std = std;
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Single-pass min/max/mean/variance in f64 (Welford, with Chan's merge).
#[derive(Debug, Clone, Copy)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl RunningStats {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn extend(&mut self, values: &[f32]) {
        for &v in values {
            self.push(v as f64);
        }
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    pub fn finish(&self, layer_id: &str, target: Target, bw: u8, fl_cap: i32) -> DistributionStats {
        let max_abs = self.min.abs().max(self.max.abs());
        let il = il_for_max_abs(max_abs as f32);
        DistributionStats {
            layer_id: layer_id.to_string(),
            target,
            min: self.min,
            max: self.max,
            mean: self.mean.clamp(self.min, self.max),
            std: self.variance().sqrt(),
            bw,
            suggested_il: il,
            suggested_fl: fit_fl(bw, il, fl_cap),
            sample_count: self.n,
        }
    }
}

/// All parameter values of a weighted layer (kernel then bias).
pub fn weight_values(net: &Network, layer_id: &str) -> Result<Vec<f32>> {
    let layer = net.layer(layer_id)?;
    if !layer.is_weighted() {
        return Err(Error::NotWeighted {
            layer: layer_id.to_string(),
        });
    }
    Ok(layer
        .params
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect())
}

/// One record per weighted layer; biases are pooled with the kernel.
pub fn analyze_weights(net: &Network, bw: u8, fl_cap: i32) -> Vec<DistributionStats> {
    net.weighted_layers()
        .map(|layer| {
            let mut acc = RunningStats::default();
            for p in &layer.params {
                acc.extend(p.data());
            }
            acc.finish(&layer.id, Target::Weights, bw, fl_cap)
        })
        .collect()
}

/// One record per layer, taken at the layer's activation point and
/// aggregated over the whole batch.
pub fn analyze_activations(
    net: &Network,
    calib: &[Tensor],
    bw: u8,
    fl_cap: i32,
) -> Result<Vec<DistributionStats>> {
    if calib.is_empty() {
        return Err(Error::InvalidArgument("calibration batch is empty".into()));
    }
    let plan = QuantPlan::new(net, &NetworkQuantConfig::default())?;
    calib.iter().try_for_each(|s| check_input(net, s))?;
    let per_sample: Vec<Vec<RunningStats>> = calib
        .par_iter()
        .map(|s| {
            let outs = plan.run(s)?;
            Ok(outs
                .iter()
                .map(|t| {
                    let mut acc = RunningStats::default();
                    acc.extend(t.data());
                    acc
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    // merge in sample order so the result does not depend on scheduling
    let mut totals = vec![RunningStats::default(); net.len()];
    for sample in &per_sample {
        for (total, acc) in totals.iter_mut().zip(sample) {
            total.merge(acc);
        }
    }
    Ok(net
        .layers()
        .iter()
        .enumerate()
        .map(|(idx, layer)| {
            totals[net.activation_point(idx)].finish(&layer.id, Target::Activations, bw, fl_cap)
        })
        .collect())
}
