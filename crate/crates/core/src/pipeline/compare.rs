//! Float-vs-quantized comparison of layer outputs and memory savings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::infer::{infer_float, Activations, QuantPlan};
use crate::network::Network;
use crate::pipeline::distance::squared_distance;
use crate::quant::{saving_pct, NetworkQuantConfig, Target};
use crate::tensor::{shape_numel, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDistance {
    pub layer: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonResult {
    /// Batch-mean L2 distance of every layer's output, in layer order.
    pub per_layer_distance: Vec<LayerDistance>,
    /// Distance at the last layer.
    pub final_distance: f64,
    pub weights_saving_pct: f64,
    pub activation_traffic_saving_pct: f64,
    /// Saving over weight storage and activation traffic taken together.
    pub combined_saving_pct: f64,
}

impl ComparisonResult {
    pub fn distance_of(&self, layer: &str) -> Option<f64> {
        self.per_layer_distance
            .iter()
            .find(|d| d.layer == layer)
            .map(|d| d.distance)
    }
}

/// Bit totals of a configuration against the 32-bit baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryFootprint {
    pub weights_baseline: u64,
    pub weights: u64,
    pub traffic_baseline: u64,
    pub traffic: u64,
}

impl MemoryFootprint {
    pub fn weights_saving_pct(&self) -> f64 {
        saving_pct(self.weights_baseline, self.weights)
    }

    pub fn traffic_saving_pct(&self) -> f64 {
        saving_pct(self.traffic_baseline, self.traffic)
    }

    pub fn combined_saving_pct(&self) -> f64 {
        saving_pct(
            self.weights_baseline + self.traffic_baseline,
            self.weights + self.traffic,
        )
    }
}

/// Memory model of `cfg` on `net`. Unconfigured tensors count at 32 bits.
///
/// Weight storage covers every layer's parameters; activation traffic covers
/// every layer's output tensor for one sample. An activation scheme on a
/// conv/fully-connected layer covers its fused batch-norm/ReLU followers
/// too; where schemes overlap the narrowest wins.
pub fn memory_footprint(net: &Network, cfg: &NetworkQuantConfig) -> MemoryFootprint {
    let mut fp = MemoryFootprint {
        weights_baseline: 0,
        weights: 0,
        traffic_baseline: 0,
        traffic: 0,
    };
    let mut traffic_bits: Vec<Option<u64>> = vec![None; net.len()];
    for (idx, layer) in net.layers().iter().enumerate() {
        let n = layer.param_count() as u64;
        fp.weights_baseline += n * 32;
        fp.weights += match cfg.get(&layer.id, Target::Weights) {
            Some(s) => s.storage_bits(n),
            None => n * 32,
        };
        if let Some(s) = cfg.get(&layer.id, Target::Activations) {
            let span = idx..=net.activation_point(idx);
            for (slot, shape) in traffic_bits[span.clone()].iter_mut().zip(&net.output_shapes()[span]) {
                let bits = s.traffic_bits(shape_numel(shape) as u64);
                *slot = Some(slot.map_or(bits, |b| b.min(bits)));
            }
        }
    }
    for (t, shape) in net.output_shapes().iter().enumerate() {
        let n = shape_numel(shape) as u64;
        fp.traffic_baseline += n * 32;
        fp.traffic += traffic_bits[t].unwrap_or(n * 32);
    }
    fp
}

/// A network and calibration batch with the float baseline precomputed.
#[derive(Debug)]
pub struct Evaluator<'a> {
    net: &'a Network,
    batch: &'a [Tensor],
    baseline: Vec<Activations>,
}

impl<'a> Evaluator<'a> {
    pub fn new(net: &'a Network, batch: &'a [Tensor]) -> Result<Self> {
        let baseline = infer_float(net, batch)?;
        Ok(Self {
            net,
            batch,
            baseline,
        })
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn batch(&self) -> &'a [Tensor] {
        self.batch
    }

    pub fn baseline(&self) -> &[Activations] {
        &self.baseline
    }

    /// Per-sample squared distances for layers `0..end`; layers upstream of
    /// the first quantized one are reused from the baseline.
    fn squared_distances(&self, cfg: &NetworkQuantConfig, end: usize) -> Result<Vec<Vec<f64>>> {
        let plan = QuantPlan::new(self.net, cfg)?;
        let first = plan.first_affected().min(end);
        self.batch
            .par_iter()
            .zip(&self.baseline)
            .map(|(sample, base)| {
                let mut d = vec![0.0; end];
                if first < end {
                    let input = if first == 0 { sample } else { &base[first - 1] };
                    let tail = plan.run_span(first, end, input)?;
                    for (i, out) in tail.iter().enumerate() {
                        d[first + i] = squared_distance(base[first + i].data(), out.data());
                    }
                }
                Ok(d)
            })
            .collect()
    }

    fn mean_distances(&self, cfg: &NetworkQuantConfig, end: usize) -> Result<Vec<f64>> {
        let per_sample = self.squared_distances(cfg, end)?;
        let mut sums = vec![0.0; end];
        for sample in &per_sample {
            for (s, d) in sums.iter_mut().zip(sample) {
                *s += d.sqrt();
            }
        }
        let n = per_sample.len().max(1) as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }

    /// Batch-mean distance at layer index `idx` only.
    pub fn distance_at(&self, cfg: &NetworkQuantConfig, idx: usize) -> Result<f64> {
        Ok(self.mean_distances(cfg, idx + 1)?[idx])
    }

    pub fn compare(&self, cfg: &NetworkQuantConfig) -> Result<ComparisonResult> {
        let means = self.mean_distances(cfg, self.net.len())?;
        let fp = memory_footprint(self.net, cfg);
        Ok(ComparisonResult {
            per_layer_distance: self
                .net
                .layers()
                .iter()
                .zip(&means)
                .map(|(l, &distance)| LayerDistance {
                    layer: l.id.clone(),
                    distance,
                })
                .collect(),
            final_distance: means.last().copied().unwrap_or(0.0),
            weights_saving_pct: fp.weights_saving_pct(),
            activation_traffic_saving_pct: fp.traffic_saving_pct(),
            combined_saving_pct: fp.combined_saving_pct(),
        })
    }
}

/// Runs float and quantized inference on `batch` and compares them.
pub fn compare(net: &Network, cfg: &NetworkQuantConfig, batch: &[Tensor]) -> Result<ComparisonResult> {
    Evaluator::new(net, batch)?.compare(cfg)
}
