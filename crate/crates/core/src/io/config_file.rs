//! The configuration file passed from layer analysis to exploration, and
//! the selected-configuration file passed on to quantization.
//!
//! Both are pretty-printed JSON with a trailing newline. Loading is strict:
//! unknown fields, out-of-range parameters and version mismatches are
//! rejected with the offending location.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::analysis::DistributionStats;
use crate::error::{Error, Result};
use crate::io::{read_text, schema_error, write_atomic};
use crate::pipeline::{FittedSchemes, SweepSpec};
use crate::quant::NetworkQuantConfig;

pub const CONFIG_FORMAT: &str = "quantscope-config";
pub const QUANT_CONFIG_FORMAT: &str = "quantscope-quant-config";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    /// Seed that drew the calibration subsample.
    pub seed: u64,
    pub batch_size: usize,
    /// Samples available in the calibration file.
    pub calibration_samples: usize,
}

/// Phase-1 output: statistics, fitted schemes and the sweep to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub format: String,
    pub version: u32,
    pub metadata: Metadata,
    pub stats: Vec<DistributionStats>,
    pub schemes: FittedSchemes,
    pub sweep: SweepSpec,
}

impl ConfigFile {
    pub fn new(metadata: Metadata, stats: Vec<DistributionStats>, schemes: FittedSchemes, sweep: SweepSpec) -> Self {
        Self {
            format: CONFIG_FORMAT.into(),
            version: VERSION,
            metadata,
            stats,
            schemes,
            sweep,
        }
    }

    /// Canonical serialized form.
    pub fn to_json(&self) -> String {
        canonical(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = strict(text)?;
        header(&cfg.format, CONFIG_FORMAT, cfg.version)?;
        for (i, f) in cfg.schemes.iter().enumerate() {
            located(f.scheme.validate(), format!("schemes[{i}].scheme"))?;
            if f.scheme.kind() != f.technique || f.scheme.bw() != f.bw {
                return Err(Error::Schema {
                    location: format!("schemes[{i}]"),
                    message: "scheme disagrees with its technique or bit width".into(),
                });
            }
        }
        located(cfg.sweep.validate(), "sweep".into())?;
        Ok(cfg)
    }
}

/// A single selected configuration, ready for quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantConfigFile {
    pub format: String,
    pub version: u32,
    pub config: NetworkQuantConfig,
}

impl QuantConfigFile {
    pub fn new(config: NetworkQuantConfig) -> Self {
        Self {
            format: QUANT_CONFIG_FORMAT.into(),
            version: VERSION,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        canonical(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = strict(text)?;
        header(&file.format, QUANT_CONFIG_FORMAT, file.version)?;
        for (id, schemes) in &file.config.entries {
            for (name, s) in [("weights", &schemes.weights), ("activations", &schemes.activations)] {
                if let Some(s) = s {
                    located(s.validate(), format!("config.entries.{id}.{name}"))?;
                }
            }
        }
        Ok(file)
    }
}

fn canonical<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("config types serialize");
    text.push('\n');
    text
}

fn strict<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    Ok(value)
}

fn header(format: &str, expected: &str, version: u32) -> Result<()> {
    if format != expected {
        return Err(Error::Schema {
            location: "format".into(),
            message: format!("expected \"{expected}\", found \"{format}\""),
        });
    }
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    Ok(())
}

fn located(r: Result<()>, location: String) -> Result<()> {
    r.map_err(|e| Error::Schema {
        location,
        message: e.to_string(),
    })
}

pub fn save_config(path: &Path, cfg: &ConfigFile) -> Result<()> {
    write_atomic(path, cfg.to_json().as_bytes())
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    ConfigFile::from_json(&read_text(path)?)
}

pub fn save_quant_config(path: &Path, cfg: &NetworkQuantConfig) -> Result<()> {
    write_atomic(path, QuantConfigFile::new(cfg.clone()).to_json().as_bytes())
}

pub fn load_quant_config(path: &Path) -> Result<NetworkQuantConfig> {
    Ok(QuantConfigFile::from_json(&read_text(path)?)?.config)
}
