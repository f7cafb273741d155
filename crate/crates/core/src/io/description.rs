//! Human-readable network descriptions (JSON) and their pairing with a
//! weights container.
//!
//! ```json
//! {
//!   "format": "quantscope-network",
//!   "version": 1,
//!   "input_shape": [3, 16, 16],
//!   "layers": [
//!     {"id": "conv1", "kind": "conv2d", "in_channels": 3, "out_channels": 8, "kernel": 3, "padding": 1},
//!     {"id": "relu1", "kind": "relu"}
//!   ]
//! }
//! ```
//!
//! Parameters of layer `id` live in container records named `id.weight`,
//! `id.bias`, `id.scale` and so on, following [`LayerKind::param_names`].

use std::collections::HashSet;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::io::container::{Container, Record};
use crate::io::{read_file, read_text, schema_error, write_atomic};
use crate::network::{Layer, LayerKind, Network, LAYER_KINDS};

pub const FORMAT: &str = "quantscope-network";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    pub input_shape: Vec<usize>,
    pub layers: Vec<(String, LayerKind)>,
}

impl NetworkDescription {
    pub fn of(net: &Network) -> Self {
        Self {
            input_shape: net.input_shape().to_vec(),
            layers: net.layers().iter().map(|l| (l.id.clone(), l.kind.clone())).collect(),
        }
    }

    /// Canonical text: pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|(id, kind)| {
                let mut obj = match serde_json::to_value(kind).expect("layer kinds serialize") {
                    Value::Object(m) => m,
                    _ => unreachable!("layer kinds serialize as objects"),
                };
                obj.insert("id".into(), Value::String(id.clone()));
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "format": FORMAT,
            "version": VERSION,
            "input_shape": self.input_shape,
            "layers": layers,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
        text.push('\n');
        text
    }
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn take<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(at, format!("missing field `{key}`")))
}

pub fn parse_description(text: &str) -> Result<NetworkDescription> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema(format!("line {}", e.line()), e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| schema("<root>", "expected an object"))?;
    for key in obj.keys() {
        if !["format", "version", "input_shape", "layers"].contains(&key.as_str()) {
            return Err(schema(key.as_str(), "unknown field"));
        }
    }
    if take(obj, "format", "<root>")?.as_str() != Some(FORMAT) {
        return Err(schema("format", format!("expected \"{FORMAT}\"")));
    }
    let version = take(obj, "version", "<root>")?
        .as_u64()
        .ok_or_else(|| schema("version", "expected an unsigned integer"))?;
    if version != VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: VERSION,
        });
    }
    let input_shape: Vec<usize> = serde_path_to_error::deserialize(take(obj, "input_shape", "<root>")?.clone())
        .map_err(|e| prefixed(schema_error(e), "input_shape"))?;
    let raw_layers = take(obj, "layers", "<root>")?
        .as_array()
        .ok_or_else(|| schema("layers", "expected an array"))?;
    let mut layers = Vec::with_capacity(raw_layers.len());
    for (i, raw) in raw_layers.iter().enumerate() {
        let at = format!("layers[{i}]");
        let mut fields = raw.as_object().ok_or_else(|| schema(&at, "expected an object"))?.clone();
        let id = match fields.remove("id") {
            Some(Value::String(s)) if !s.is_empty() => s,
            _ => return Err(schema(format!("{at}.id"), "expected a non-empty string")),
        };
        let kind = match fields.get("kind") {
            Some(Value::String(k)) => k.clone(),
            _ => return Err(schema(format!("{at}.kind"), "expected a string")),
        };
        if !LAYER_KINDS.contains(&kind.as_str()) {
            return Err(Error::UnknownLayerKind { layer: id, kind });
        }
        let kind: LayerKind = serde_path_to_error::deserialize(Value::Object(fields.clone()))
            .map_err(|e| prefixed(schema_error(e), &at))?;
        // unit kinds accept stray keys during deserialization; compare against the re-serialized form
        if let Ok(Value::Object(known)) = serde_json::to_value(&kind) {
            if let Some(extra) = fields.keys().find(|k| !known.contains_key(*k)) {
                return Err(schema(format!("{at}.{extra}"), "unknown field"));
            }
        }
        layers.push((id, kind));
    }
    Ok(NetworkDescription { input_shape, layers })
}

fn prefixed(err: Error, prefix: &str) -> Error {
    match err {
        Error::Schema { location, message } => {
            let location = if location == "<root>" {
                prefix.to_string()
            } else {
                format!("{prefix}.{location}")
            };
            Error::Schema { location, message }
        }
        other => other,
    }
}

/// Pairs a description with its weights, checking every record.
///
/// Quantized records are dequantized on load. Records that no layer claims
/// are rejected.
pub fn load_model(desc: &NetworkDescription, weights: &Container) -> Result<Network> {
    let mut used = HashSet::new();
    let mut layers = Vec::with_capacity(desc.layers.len());
    for (id, kind) in &desc.layers {
        let mut params = Vec::new();
        for (name, shape) in kind.param_names().iter().zip(kind.param_shapes()) {
            let record_name = format!("{id}.{name}");
            let record = weights.get(&record_name).ok_or_else(|| Error::MissingWeights {
                layer: id.clone(),
                record: record_name.clone(),
            })?;
            if record.shape != shape {
                return Err(Error::shape(
                    id,
                    format!("record `{record_name}` has shape {:?}, expected {shape:?}", record.shape),
                ));
            }
            let t = record.to_tensor()?;
            if !t.is_finite() {
                return Err(Error::NonFinite(record_name));
            }
            used.insert(record_name);
            params.push(t);
        }
        layers.push(Layer::new(id.clone(), kind.clone(), params));
    }
    if let Some(extra) = weights.records.iter().find(|r| !used.contains(&r.name)) {
        return Err(Error::Container(format!("record `{}` matches no layer parameter", extra.name)));
    }
    Network::new(desc.input_shape.clone(), layers)
}

pub fn load_model_files(description: &Path, weights: &Path) -> Result<Network> {
    let desc = parse_description(&read_text(description)?)?;
    let weights = Container::from_bytes(&read_file(weights)?)?;
    load_model(&desc, &weights)
}

/// Float weights of every parameterized layer, in layer and parameter order.
pub fn weights_container(net: &Network) -> Container {
    let mut c = Container::default();
    for layer in net.layers() {
        for (name, t) in layer.kind.param_names().iter().zip(&layer.params) {
            c.push(Record::tensor(format!("{}.{name}", layer.id), t));
        }
    }
    c
}

pub fn save_model(net: &Network, description: &Path, weights: &Path) -> Result<()> {
    write_atomic(description, NetworkDescription::of(net).to_json().as_bytes())?;
    write_atomic(weights, &weights_container(net).to_bytes())
}
