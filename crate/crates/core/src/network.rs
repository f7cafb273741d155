//! Layer roster, network chains and shape propagation.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::{shape_numel, Tensor};

/// Layer type plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerKind {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    MaxPool2d {
        window: usize,
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    BatchNorm {
        channels: usize,
        #[serde(default = "default_epsilon")]
        epsilon: f32,
    },
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
    Softmax,
}

fn one() -> usize {
    1
}

fn default_epsilon() -> f32 {
    1e-5
}

pub const LAYER_KINDS: [&str; 6] = [
    "conv2d",
    "relu",
    "max_pool2d",
    "batch_norm",
    "fully_connected",
    "softmax",
];

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d { .. } => "max_pool2d",
            LayerKind::BatchNorm { .. } => "batch_norm",
            LayerKind::FullyConnected { .. } => "fully_connected",
            LayerKind::Softmax => "softmax",
        }
    }

    /// Names of the parameter tensors this kind carries, in storage order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            LayerKind::Conv2d { .. } | LayerKind::FullyConnected { .. } => &["weight", "bias"],
            LayerKind::BatchNorm { .. } => &["scale", "shift", "mean", "var"],
            _ => &[],
        }
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            ],
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => vec![vec![out_features, in_features], vec![out_features]],
            LayerKind::BatchNorm { channels, .. } => vec![vec![channels]; 4],
            _ => Vec::new(),
        }
    }

    /// Conv and fully-connected layers hold quantizable weights.
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            LayerKind::Conv2d { .. } | LayerKind::FullyConnected { .. }
        )
    }

    /// Kinds that fuse into a preceding weighted layer's activation output.
    pub fn is_fusable_follower(&self) -> bool {
        matches!(self, LayerKind::BatchNorm { .. } | LayerKind::Relu)
    }

    pub fn output_shape(&self, id: &str, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = spatial(id, input)?;
                if c != in_channels {
                    return Err(Error::shape(
                        id,
                        format!("expects {in_channels} input channels, got {c}"),
                    ));
                }
                if kernel == 0 || stride == 0 {
                    return Err(Error::shape(id, "kernel and stride must be positive"));
                }
                let oh = window_extent(id, h, kernel, stride, padding)?;
                let ow = window_extent(id, w, kernel, stride, padding)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerKind::MaxPool2d {
                window,
                stride,
                padding,
            } => {
                let [c, h, w] = spatial(id, input)?;
                if window == 0 || stride == 0 {
                    return Err(Error::shape(id, "window and stride must be positive"));
                }
                if padding >= window {
                    return Err(Error::shape(id, "pool padding must be smaller than the window"));
                }
                let oh = window_extent(id, h, window, stride, padding)?;
                let ow = window_extent(id, w, window, stride, padding)?;
                Ok(vec![c, oh, ow])
            }
            LayerKind::BatchNorm { channels, .. } => {
                if input.first() != Some(&channels) {
                    return Err(Error::shape(
                        id,
                        format!("expects {channels} channels, got shape {input:?}"),
                    ));
                }
                Ok(input.to_vec())
            }
            LayerKind::FullyConnected {
                in_features,
                out_features,
            } => {
                let n = shape_numel(input);
                if n != in_features {
                    return Err(Error::shape(
                        id,
                        format!("expects {in_features} input features, got {n} ({input:?})"),
                    ));
                }
                Ok(vec![out_features])
            }
            LayerKind::Relu | LayerKind::Softmax => Ok(input.to_vec()),
        }
    }
}

fn spatial(id: &str, input: &[usize]) -> Result<[usize; 3]> {
    match *input {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::shape(
            id,
            format!("expects a [channels, rows, cols] input, got {input:?}"),
        )),
    }
}

fn window_extent(id: &str, n: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = n + 2 * pad;
    if padded < k {
        return Err(Error::shape(
            id,
            format!("window {k} larger than padded extent {padded}"),
        ));
    }
    Ok((padded - k) / stride + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub id: String,
    pub kind: LayerKind,
    /// Parameter tensors in `kind.param_names()` order.
    pub params: Vec<Tensor>,
}

impl Layer {
    pub fn new(id: impl Into<String>, kind: LayerKind, params: Vec<Tensor>) -> Self {
        Self {
            id: id.into(),
            kind,
            params,
        }
    }

    pub fn relu(id: impl Into<String>) -> Self {
        Self::new(id, LayerKind::Relu, Vec::new())
    }

    pub fn softmax(id: impl Into<String>) -> Self {
        Self::new(id, LayerKind::Softmax, Vec::new())
    }

    pub fn max_pool(id: impl Into<String>, window: usize, stride: usize) -> Self {
        Self::new(
            id,
            LayerKind::MaxPool2d {
                window,
                stride,
                padding: 0,
            },
            Vec::new(),
        )
    }

    pub fn is_weighted(&self) -> bool {
        self.kind.is_weighted()
    }

    /// Number of stored parameter values.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check_params(&self) -> Result<()> {
        let expected = self.kind.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Error::shape(
                &self.id,
                format!(
                    "expects {} parameter tensors, got {}",
                    expected.len(),
                    self.params.len()
                ),
            ));
        }
        for ((name, want), got) in self
            .kind
            .param_names()
            .iter()
            .zip(&expected)
            .zip(&self.params)
        {
            if got.shape() != want.as_slice() {
                return Err(Error::shape(
                    &self.id,
                    format!("parameter `{name}` has shape {:?}, expected {want:?}", got.shape()),
                ));
            }
            if !got.is_finite() {
                return Err(Error::NonFinite(format!("{}.{name}", self.id)));
            }
        }
        Ok(())
    }

    /// Runs the layer on `input` using `params` in place of the stored ones.
    pub fn forward_with(&self, input: &Tensor, params: &[Tensor]) -> Result<Tensor> {
        let out_shape = self.kind.output_shape(&self.id, input.shape())?;
        let out = match self.kind {
            LayerKind::Conv2d {
                stride, padding, ..
            } => ops::conv2d(input, &params[0], &params[1], stride, padding, out_shape),
            LayerKind::Relu => ops::relu(input),
            LayerKind::MaxPool2d {
                window,
                stride,
                padding,
            } => ops::max_pool2d(input, window, stride, padding, out_shape),
            LayerKind::BatchNorm { epsilon, .. } => ops::batch_norm(
                input, &params[0], &params[1], &params[2], &params[3], epsilon,
            ),
            LayerKind::FullyConnected { .. } => {
                ops::fully_connected(input, &params[0], &params[1])
            }
            LayerKind::Softmax => ops::softmax(input),
        };
        Ok(out)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.forward_with(input, &self.params)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.kind.name())
    }
}

/// Output shape of every layer in order, failing at the first inconsistency.
pub fn propagate_shapes(input_shape: &[usize], layers: &[Layer]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = input_shape.to_vec();
    for layer in layers {
        current = layer.kind.output_shape(&layer.id, &current)?;
        shapes.push(current.clone());
    }
    Ok(shapes)
}

/// An ordered chain of layers; immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    output_shapes: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let mut seen = HashSet::new();
        for layer in &layers {
            if !seen.insert(layer.id.as_str()) {
                return Err(Error::DuplicateLayer(layer.id.clone()));
            }
            layer.check_params()?;
        }
        let output_shapes = propagate_shapes(&input_shape, &layers)?;
        Ok(Self {
            input_shape,
            layers,
            output_shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_shapes(&self) -> &[Vec<usize>] {
        &self.output_shapes
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| Error::UnknownLayer(id.to_string()))
    }

    pub fn layer(&self, id: &str) -> Result<&Layer> {
        Ok(&self.layers[self.index_of(id)?])
    }

    /// Index of the tensor where layer `idx`'s activations are observed.
    ///
    /// For conv and fully-connected layers this is the end of the chain of
    /// immediately following batch-norm/ReLU layers; for all other layers it
    /// is the layer itself.
    pub fn activation_point(&self, idx: usize) -> usize {
        if !self.layers[idx].is_weighted() {
            return idx;
        }
        let mut end = idx;
        while end + 1 < self.layers.len() && self.layers[end + 1].kind.is_fusable_follower() {
            end += 1;
        }
        end
    }

    /// Returns a copy with one layer's parameters replaced.
    pub fn with_params(&self, id: &str, params: Vec<Tensor>) -> Result<Self> {
        let idx = self.index_of(id)?;
        let mut layers = self.layers.clone();
        layers[idx].params = params;
        Self::new(self.input_shape.clone(), layers)
    }

    pub fn weighted_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(|l| l.is_weighted())
    }
}
