//! Float-32 baseline inference and fake-quantized inference.
//!
//! Quantized execution stays in float: stored weights are replaced by their
//! quantize→dequantize image once, and configured activation points have
//! their output tensor replaced the same way. An activation scheme set on a
//! conv or fully-connected layer is applied at the end of its fused
//! batch-norm/ReLU chain (see [`Network::activation_point`]).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::quant::{NetworkQuantConfig, QuantScheme, Target};
use crate::tensor::Tensor;

/// Per-layer outputs of one sample, in layer order.
pub type Activations = Vec<Tensor>;

pub(crate) fn check_input(net: &Network, sample: &Tensor) -> Result<()> {
    if sample.shape() != net.input_shape() {
        let layer = net
            .layers()
            .first()
            .map_or_else(|| "<input>".to_string(), |l| l.id.clone());
        return Err(Error::Shape {
            layer,
            detail: format!(
                "input sample has shape {:?}, network expects {:?}",
                sample.shape(),
                net.input_shape()
            ),
        });
    }
    if !sample.is_finite() {
        return Err(Error::NonFinite("input sample".into()));
    }
    Ok(())
}

/// Runs the float baseline, returning every layer's output per sample.
pub fn infer_float(net: &Network, batch: &[Tensor]) -> Result<Vec<Activations>> {
    infer_quantized(net, &NetworkQuantConfig::default(), batch)
}

/// Runs the network with `cfg` applied. An empty config reproduces
/// [`infer_float`] bitwise.
pub fn infer_quantized(
    net: &Network,
    cfg: &NetworkQuantConfig,
    batch: &[Tensor],
) -> Result<Vec<Activations>> {
    let plan = QuantPlan::new(net, cfg)?;
    batch.iter().try_for_each(|s| check_input(net, s))?;
    batch.par_iter().map(|s| plan.run(s)).collect()
}

/// A config resolved against a network: quantized weights materialized and
/// activation quantizers attached to their observation points.
#[derive(Debug, Clone)]
pub struct QuantPlan<'a> {
    net: &'a Network,
    params: Vec<Option<Vec<Tensor>>>,
    act: Vec<Vec<QuantScheme>>,
    first: usize,
}

impl<'a> QuantPlan<'a> {
    pub fn new(net: &'a Network, cfg: &NetworkQuantConfig) -> Result<Self> {
        cfg.validate(net)?;
        let n = net.len();
        let mut params = vec![None; n];
        let mut act: Vec<Vec<QuantScheme>> = vec![Vec::new(); n];
        let mut first = n;
        // BTreeMap order is by id; attach activation schemes in layer order instead
        let mut configured: Vec<(usize, &str)> = cfg
            .layer_ids()
            .into_iter()
            .map(|id| net.index_of(id).map(|i| (i, id)))
            .collect::<Result<_>>()?;
        configured.sort_unstable();
        for (idx, id) in configured {
            let layer = &net.layers()[idx];
            if let Some(scheme) = cfg.get(id, Target::Weights) {
                let q = layer
                    .params
                    .iter()
                    .map(|p| {
                        scheme.fake_quantize(p).ok_or_else(|| Error::Unfitted {
                            layer: id.to_string(),
                            target: Target::Weights.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                params[idx] = Some(q);
                first = first.min(idx);
            }
            if let Some(scheme) = cfg.get(id, Target::Activations) {
                let point = net.activation_point(idx);
                act[point].push(scheme.clone());
                first = first.min(idx);
            }
        }
        Ok(Self {
            net,
            params,
            act,
            first,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    /// Index of the first layer whose computation differs from the baseline.
    pub fn first_affected(&self) -> usize {
        self.first
    }

    pub fn run(&self, input: &Tensor) -> Result<Activations> {
        self.run_from(0, input)
    }

    /// Runs layers `start..` given the input of layer `start`.
    pub fn run_from(&self, start: usize, input: &Tensor) -> Result<Activations> {
        self.run_span(start, self.net.len(), input)
    }

    /// Runs layers `start..end` given the input of layer `start`.
    pub fn run_span(&self, start: usize, end: usize, input: &Tensor) -> Result<Activations> {
        let layers = &self.net.layers()[start..end];
        let mut outs: Activations = Vec::with_capacity(layers.len());
        for (offset, layer) in layers.iter().enumerate() {
            let idx = start + offset;
            let x = outs.last().unwrap_or(input);
            let params = self.params[idx].as_deref().unwrap_or(&layer.params);
            let mut y = layer.forward_with(x, params)?;
            for scheme in &self.act[idx] {
                y = scheme.fake_quantize(&y).ok_or_else(|| Error::Unfitted {
                    layer: layer.id.clone(),
                    target: Target::Activations.to_string(),
                })?;
            }
            outs.push(y);
        }
        Ok(outs)
    }
}
