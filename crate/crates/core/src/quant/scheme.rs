use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::quant::fixed::FixedParams;
use crate::quant::kmeans::{KMeansTable, RangeKind};
use crate::quant::memory::{fixed_point_traffic, memory_saving};
use crate::tensor::Tensor;

/// The four representation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    StandardFixed,
    DynamicFixed,
    KmeansLinear,
    KmeansGaussian,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::StandardFixed,
        SchemeKind::DynamicFixed,
        SchemeKind::KmeansLinear,
        SchemeKind::KmeansGaussian,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::StandardFixed => "standard_fixed",
            SchemeKind::DynamicFixed => "dynamic_fixed",
            SchemeKind::KmeansLinear => "kmeans_linear",
            SchemeKind::KmeansGaussian => "kmeans_gaussian",
        }
    }

    pub fn is_kmeans(&self) -> bool {
        matches!(self, SchemeKind::KmeansLinear | SchemeKind::KmeansGaussian)
    }

    pub fn range_kind(&self) -> Option<RangeKind> {
        match self {
            SchemeKind::KmeansLinear => Some(RangeKind::Linear),
            SchemeKind::KmeansGaussian => Some(RangeKind::Gaussian),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard_fixed" | "standard" | "fixed" => Ok(SchemeKind::StandardFixed),
            "dynamic_fixed" | "dynamic" => Ok(SchemeKind::DynamicFixed),
            "kmeans_linear" | "kmeans" => Ok(SchemeKind::KmeansLinear),
            "kmeans_gaussian" => Ok(SchemeKind::KmeansGaussian),
            _ => Err(Error::InvalidArgument(format!("unknown technique `{s}`"))),
        }
    }
}

/// Which variable group of a layer is quantized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Weights,
    Activations,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::Weights => "weights",
            Target::Activations => "activations",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A representation with its fitted parameters.
///
/// `Pending` names a requested technique and bit width whose parameters have
/// not been fitted yet; it cannot be executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", rename_all = "snake_case")]
pub enum QuantScheme {
    StandardFixed(FixedParams),
    DynamicFixed(FixedParams),
    Kmeans(KMeansTable),
    Pending { kind: SchemeKind, bw: u8 },
}

impl QuantScheme {
    pub fn kind(&self) -> SchemeKind {
        match self {
            QuantScheme::StandardFixed(_) => SchemeKind::StandardFixed,
            QuantScheme::DynamicFixed(_) => SchemeKind::DynamicFixed,
            QuantScheme::Kmeans(t) => match t.dist {
                RangeKind::Linear => SchemeKind::KmeansLinear,
                RangeKind::Gaussian => SchemeKind::KmeansGaussian,
            },
            QuantScheme::Pending { kind, .. } => *kind,
        }
    }

    pub fn bw(&self) -> u8 {
        match self {
            QuantScheme::StandardFixed(p) | QuantScheme::DynamicFixed(p) => p.bw,
            QuantScheme::Kmeans(t) => t.bw,
            QuantScheme::Pending { bw, .. } => *bw,
        }
    }

    pub fn is_fitted(&self) -> bool {
        !matches!(self, QuantScheme::Pending { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuantScheme::StandardFixed(p) | QuantScheme::DynamicFixed(p) => p.validate(),
            QuantScheme::Kmeans(t) => t.validate(),
            QuantScheme::Pending { .. } => Ok(()),
        }
    }

    /// Fixed-point parameters for the fixed-point families.
    pub fn fixed_params(&self) -> Option<FixedParams> {
        match self {
            QuantScheme::StandardFixed(p) | QuantScheme::DynamicFixed(p) => Some(*p),
            _ => None,
        }
    }

    /// Quantize → dequantize, in float. `None` for an unfitted scheme.
    pub fn fake_quantize(&self, t: &Tensor) -> Option<Tensor> {
        match self {
            QuantScheme::StandardFixed(p) | QuantScheme::DynamicFixed(p) => {
                Some(t.map(|v| p.fake_quantize(v)))
            }
            QuantScheme::Kmeans(table) => {
                let centers = table.centers();
                Some(t.map(|v| centers[table.index_of(v) as usize]))
            }
            QuantScheme::Pending { .. } => None,
        }
    }

    /// Bits to store `n` values, including the shared-value table for k-means.
    pub fn storage_bits(&self, n: u64) -> u64 {
        match self {
            QuantScheme::Kmeans(t) => memory_saving(32, t.k(), t.table.bw as u32, n)
                .map(|m| m.total_bits)
                .unwrap_or(u64::MAX),
            s => fixed_point_traffic(n, s.bw() as u32),
        }
    }

    /// Bits moved when `n` values pass between layers (indices only for k-means).
    pub fn traffic_bits(&self, n: u64) -> u64 {
        fixed_point_traffic(n, self.bw() as u32)
    }

    /// Short parameter summary for report tables.
    pub fn summary(&self) -> String {
        match self {
            QuantScheme::StandardFixed(p) | QuantScheme::DynamicFixed(p) => {
                format!("IL={} FL={}", p.il, p.fl)
            }
            QuantScheme::Kmeans(t) => format!("K={} FL={}", t.k(), t.table.fl),
            QuantScheme::Pending { .. } => "unfitted".to_string(),
        }
    }
}

/// Weights and activations schemes of one layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSchemes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<QuantScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<QuantScheme>,
}

impl LayerSchemes {
    pub fn get(&self, target: Target) -> Option<&QuantScheme> {
        match target {
            Target::Weights => self.weights.as_ref(),
            Target::Activations => self.activations.as_ref(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_none() && self.activations.is_none()
    }
}

/// Per-layer quantization choices for one inference run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkQuantConfig {
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub entries: BTreeMap<String, LayerSchemes>,
}

impl NetworkQuantConfig {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(LayerSchemes::is_empty)
    }

    pub fn set(&mut self, layer: &str, target: Target, scheme: QuantScheme) -> &mut Self {
        let entry = self.entries.entry(layer.to_string()).or_default();
        match target {
            Target::Weights => entry.weights = Some(scheme),
            Target::Activations => entry.activations = Some(scheme),
        }
        self
    }

    pub fn with(mut self, layer: &str, target: Target, scheme: QuantScheme) -> Self {
        self.set(layer, target, scheme);
        self
    }

    pub fn get(&self, layer: &str, target: Target) -> Option<&QuantScheme> {
        self.entries.get(layer).and_then(|e| e.get(target))
    }

    /// Checks layer ids, weight placement and that every scheme is fitted.
    pub fn validate(&self, net: &Network) -> Result<()> {
        for (id, schemes) in &self.entries {
            let layer = net.layer(id)?;
            if schemes.weights.is_some() && !layer.is_weighted() {
                return Err(Error::NotWeighted { layer: id.clone() });
            }
            for target in [Target::Weights, Target::Activations] {
                if let Some(s) = schemes.get(target) {
                    if !s.is_fitted() {
                        return Err(Error::Unfitted {
                            layer: id.clone(),
                            target: target.to_string(),
                        });
                    }
                    s.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Configured layer ids, sorted.
    pub fn layer_ids(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_serde_is_tagged_and_strict() {
        let s = QuantScheme::DynamicFixed(FixedParams::new(8, 1, 6).unwrap());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"technique":"dynamic_fixed","bw":8,"il":1,"fl":6}"#);
        assert_eq!(serde_json::from_str::<QuantScheme>(&json).unwrap(), s);
        let bad = r#"{"technique":"dynamic_fixed","bw":8,"il":1,"fl":6,"extra":1}"#;
        assert!(serde_json::from_str::<QuantScheme>(bad).is_err());
    }

    #[test]
    fn technique_names_parse() {
        assert_eq!("kmeans-gaussian".parse::<SchemeKind>().unwrap(), SchemeKind::KmeansGaussian);
        assert_eq!("dynamic".parse::<SchemeKind>().unwrap(), SchemeKind::DynamicFixed);
        assert!("lloyd".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn pending_scheme_is_unfitted() {
        let s = QuantScheme::Pending {
            kind: SchemeKind::DynamicFixed,
            bw: 8,
        };
        assert!(!s.is_fitted());
        assert!(s.fake_quantize(&Tensor::vector(vec![1.0])).is_none());
    }

    #[test]
    fn storage_bits_includes_table_for_kmeans() {
        let table = KMeansTable::from_range(
            0.0,
            1.0,
            4,
            RangeKind::Linear,
            FixedParams::new(16, 0, 15).unwrap(),
        )
        .unwrap();
        let s = QuantScheme::Kmeans(table);
        assert_eq!(s.storage_bits(1000), 4000 + 16 * 16);
        assert_eq!(s.traffic_bits(1000), 4000);
    }
}
