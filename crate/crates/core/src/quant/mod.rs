//! Numeric representations: fixed-point codec, uniform k-means codebooks,
//! and the memory model.

pub mod fixed;
pub mod kmeans;
pub mod memory;
pub mod scheme;

pub use fixed::{dequantize_fixed, fit_fl, fit_il, il_for_max_abs, quantize_fixed, FixedParams};
pub use kmeans::{build_kmeans_table, quantize_kmeans, KMeansTable, RangeKind};
pub use memory::{fixed_point_traffic, memory_saving, saving_pct, MemorySaving};
pub use scheme::{LayerSchemes, NetworkQuantConfig, QuantScheme, SchemeKind, Target};
