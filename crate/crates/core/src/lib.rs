//! Post-training quantization engine.
//!
//! Two phases drive the workflow. Layer analysis collects distribution
//! statistics for every layer's weights and activations and fits per-layer
//! fixed-point or codebook parameters by grid search. Network space
//! exploration then sweeps single layers, layer groups and whole-network
//! configurations over bit widths, scoring each against the float-32
//! baseline with the Frobenius (L2) distance of layer outputs and an exact
//! memory model.
//!
//! Start with the runnable programs under `examples/`:
//!
//! ```bash
//! cargo run --example fixed_point_codec
//! cargo run --release --example sensitivity_sweep
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod infer;
pub mod io;
pub mod network;
pub mod ops;
pub mod pipeline;
pub mod quant;
pub mod reference;
pub mod tensor;

pub use error::{Error, ErrorCategory, Result};
pub use network::{Layer, LayerKind, Network};
pub use tensor::Tensor;
