use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::fixed::MAX_FL;
use crate::quant::{SchemeKind, Target};

/// Inclusive search range for the fractional-length cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlRange {
    pub lo: i32,
    pub hi: i32,
}

impl Default for FlRange {
    fn default() -> Self {
        Self { lo: 8, hi: 20 }
    }
}

impl FlRange {
    pub fn new(lo: i32, hi: i32) -> Result<Self> {
        let r = Self { lo, hi };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo < 0 || self.hi > MAX_FL || self.lo > self.hi {
            return Err(Error::InvalidArgument(format!(
                "FL range [{}, {}] must satisfy 0 <= lo <= hi <= {MAX_FL}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn caps(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }
}

impl FromStr for FlRange {
    type Err = Error;

    /// Parses `lo:hi` or `lo-hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once([':', '-'])
            .ok_or_else(|| Error::InvalidArgument(format!("FL range `{s}` is not lo:hi")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|_| Error::InvalidArgument(format!("FL range `{s}` is not lo:hi")))
        };
        Self::new(parse(lo)?, parse(hi)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Each listed layer on its own.
    SingleLayer,
    /// All listed layers together.
    LayerGroup,
    /// Every layer of the network.
    WholeNetwork,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::SingleLayer => "single_layer",
            SweepMode::LayerGroup => "layer_group",
            SweepMode::WholeNetwork => "whole_network",
        }
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "single" | "single_layer" => Ok(SweepMode::SingleLayer),
            "group" | "layer_group" => Ok(SweepMode::LayerGroup),
            "whole" | "network" | "whole_network" => Ok(SweepMode::WholeNetwork),
            _ => Err(Error::InvalidArgument(format!("unknown sweep mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Weights,
    Activations,
    Both,
}

impl Targets {
    pub fn list(&self) -> &'static [Target] {
        match self {
            Targets::Weights => &[Target::Weights],
            Targets::Activations => &[Target::Activations],
            Targets::Both => &[Target::Weights, Target::Activations],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Targets::Weights => "weights",
            Targets::Activations => "activations",
            Targets::Both => "both",
        }
    }
}

impl fmt::Display for Targets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Targets {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" | "w" => Ok(Targets::Weights),
            "activations" | "a" => Ok(Targets::Activations),
            "both" => Ok(Targets::Both),
            _ => Err(Error::InvalidArgument(format!("unknown targets `{s}`"))),
        }
    }
}

pub const DEFAULT_SIGMA_MULT: f64 = 3.0;
/// Width of the fixed-point entries of a k-means shared-value table.
pub const DEFAULT_TABLE_BW: u8 = 16;

fn default_sigma() -> f64 {
    DEFAULT_SIGMA_MULT
}

fn default_table_bw() -> u8 {
    DEFAULT_TABLE_BW
}

/// Which configurations an exploration enumerates, plus the fitting knobs
/// Phase 1 uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub targets: Targets,
    pub bit_widths: Vec<u8>,
    pub techniques: Vec<SchemeKind>,
    /// Layers to sweep (single) or the group (group); empty means all.
    #[serde(default)]
    pub layers: Vec<String>,
    #[serde(default)]
    pub fl_search_range: FlRange,
    #[serde(default = "default_sigma")]
    pub sigma_mult: f64,
    #[serde(default = "default_table_bw")]
    pub table_bw: u8,
}

impl SweepSpec {
    pub fn new(mode: SweepMode, targets: Targets, bit_widths: Vec<u8>, techniques: Vec<SchemeKind>) -> Self {
        Self {
            mode,
            targets,
            bit_widths,
            techniques,
            layers: Vec::new(),
            fl_search_range: FlRange::default(),
            sigma_mult: DEFAULT_SIGMA_MULT,
            table_bw: DEFAULT_TABLE_BW,
        }
    }

    pub fn with_layers<S: Into<String>>(mut self, layers: impl IntoIterator<Item = S>) -> Self {
        self.layers = layers.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bit_widths.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one bit width".into()));
        }
        if self.techniques.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one technique".into()));
        }
        for &bw in &self.bit_widths {
            if !(1..=32).contains(&bw) {
                return Err(Error::InvalidArgument(format!("bit width {bw} outside [1, 32]")));
            }
        }
        if !(self.sigma_mult.is_finite() && self.sigma_mult > 0.0) {
            return Err(Error::InvalidArgument("sigma multiplier must be positive".into()));
        }
        if !(2..=32).contains(&self.table_bw) {
            return Err(Error::InvalidArgument("table bit width outside [2, 32]".into()));
        }
        self.fl_search_range.validate()
    }
}
