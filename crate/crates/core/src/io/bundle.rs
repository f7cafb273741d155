//! Deployable bundles: a weights container whose quantized layers are
//! stored as packed fixed-point codes or k-means indices plus their shared
//! table, with activation schemes carried in a JSON record.

use crate::error::{Error, Result};
use crate::io::config_file::QuantConfigFile;
use crate::io::container::{Container, Payload, Record};
use crate::io::description::{load_model, NetworkDescription};
use crate::network::Network;
use crate::quant::{LayerSchemes, NetworkQuantConfig, QuantScheme, Target};

/// Name of the record holding activation schemes.
pub const ACTIVATIONS_RECORD: &str = "__activations__";

fn activation_config(cfg: &NetworkQuantConfig) -> NetworkQuantConfig {
    let mut out = NetworkQuantConfig::new(cfg.provenance.clone());
    for (id, s) in &cfg.entries {
        if let Some(a) = &s.activations {
            out.entries.insert(
                id.clone(),
                LayerSchemes {
                    weights: None,
                    activations: Some(a.clone()),
                },
            );
        }
    }
    out
}

/// Materializes `cfg` over `net`'s weights.
///
/// With an empty config the result is byte-for-byte the float weights
/// container.
pub fn quantize_bundle(net: &Network, cfg: &NetworkQuantConfig) -> Result<Container> {
    cfg.validate(net)?;
    let mut c = Container::default();
    for layer in net.layers() {
        let scheme = cfg.get(&layer.id, Target::Weights);
        for (name, t) in layer.kind.param_names().iter().zip(&layer.params) {
            let record_name = format!("{}.{name}", layer.id);
            let payload = match scheme {
                None => Payload::F32(t.data().to_vec()),
                Some(QuantScheme::StandardFixed(p)) | Some(QuantScheme::DynamicFixed(p)) => Payload::Fixed {
                    params: *p,
                    codes: t.data().iter().map(|&v| p.quantize(v)).collect(),
                },
                Some(QuantScheme::Kmeans(table)) => Payload::KMeans {
                    table: table.clone(),
                    indices: t.data().iter().map(|&v| table.index_of(v)).collect(),
                },
                Some(QuantScheme::Pending { .. }) => {
                    return Err(Error::Unfitted {
                        layer: layer.id.clone(),
                        target: Target::Weights.to_string(),
                    })
                }
            };
            c.push(Record {
                name: record_name,
                shape: t.shape().to_vec(),
                payload,
            });
        }
    }
    let act = activation_config(cfg);
    if !act.is_empty() {
        c.push(Record::json(ACTIVATIONS_RECORD, QuantConfigFile::new(act).to_json()));
    }
    Ok(c)
}

/// Loads a bundle: the network with dequantized weights, and the
/// activation-only config to run it with.
pub fn load_bundle(desc: &NetworkDescription, bundle: &Container) -> Result<(Network, NetworkQuantConfig)> {
    let mut weights = bundle.clone();
    let mut act = NetworkQuantConfig::default();
    if let Some(pos) = weights.records.iter().position(|r| r.name == ACTIVATIONS_RECORD) {
        let record = weights.records.remove(pos);
        match record.payload {
            Payload::Json(text) => act = QuantConfigFile::from_json(&text)?.config,
            _ => return Err(Error::Container(format!("`{ACTIVATIONS_RECORD}` must be a JSON record"))),
        }
    }
    let net = load_model(desc, &weights)?;
    if act.entries.values().any(|s| s.weights.is_some()) {
        return Err(Error::Container("bundle activation record carries weight schemes".into()));
    }
    act.validate(&net)?;
    Ok((net, act))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::infer_quantized;
    use crate::io::description::weights_container;
    use crate::network::{Layer, LayerKind};
    use crate::quant::{FixedParams, KMeansTable, RangeKind};
    use crate::tensor::Tensor;

    fn net() -> Network {
        let fc = LayerKind::FullyConnected {
            in_features: 4,
            out_features: 3,
        };
        Network::new(
            vec![4],
            vec![
                Layer::new(
                    "fc",
                    fc,
                    vec![
                        Tensor::from_fn(vec![3, 4], |i| (i as f32 * 0.37).sin()),
                        Tensor::vector(vec![0.1, -0.2, 0.3]),
                    ],
                ),
                Layer::relu("relu"),
                Layer::softmax("prob"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_config_matches_weights_bytes() {
        let n = net();
        let bundle = quantize_bundle(&n, &NetworkQuantConfig::default()).unwrap();
        assert_eq!(bundle.to_bytes(), weights_container(&n).to_bytes());
    }

    #[test]
    fn reload_matches_fake_quantized_inference() {
        let n = net();
        let table = KMeansTable::from_range(-1.0, 1.0, 2, RangeKind::Linear, FixedParams::new(16, 0, 14).unwrap())
            .unwrap();
        let cfg = NetworkQuantConfig::new("t")
            .with("fc", Target::Weights, QuantScheme::Kmeans(table))
            .with(
                "fc",
                Target::Activations,
                QuantScheme::DynamicFixed(FixedParams::new(6, 1, 4).unwrap()),
            );
        let bundle = Container::from_bytes(&quantize_bundle(&n, &cfg).unwrap().to_bytes()).unwrap();
        let (loaded, act) = load_bundle(&NetworkDescription::of(&n), &bundle).unwrap();
        let batch = vec![Tensor::vector(vec![0.5, -1.0, 2.0, 0.25])];
        assert_eq!(
            infer_quantized(&loaded, &act, &batch).unwrap(),
            infer_quantized(&n, &cfg, &batch).unwrap()
        );
    }
}
