//! The two-phase quantization workflow: layer analysis (statistics and
//! per-layer FL search) and network space exploration (sweeps, scoring and
//! selection).
//!
//! Configurations are scored by the L2 distance between float and
//! quantized layer outputs, averaged over the calibration batch. That
//! distance does not always track dataset accuracy; a configuration with a
//! smaller distance can still classify slightly worse.

pub mod compare;
pub mod distance;
pub mod explore;
pub mod fit;
pub mod select;
pub mod sweep;

pub use compare::{compare, memory_footprint, ComparisonResult, Evaluator, LayerDistance, MemoryFootprint};
pub use distance::l2norm_distance;
pub use explore::{explore, BestForBitWidth, ExplorationReport, ReportRow};
pub use fit::{
    fit_layer_params, fit_one, fit_standard, fl_candidates, run_layer_analysis, FitOptions, FittedScheme,
    FittedSchemes, LayerAnalysis,
};
pub use select::{select_best, Constraint, Selection};
pub use sweep::{FlRange, SweepMode, SweepSpec, Targets, DEFAULT_SIGMA_MULT, DEFAULT_TABLE_BW};
