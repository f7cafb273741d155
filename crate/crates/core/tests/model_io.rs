use std::path::PathBuf;

use proptest::prelude::*;
use quantscope::io::{
    self, load_model, parse_description, weights_container, ConfigFile, Container, NetworkDescription,
};
use quantscope::pipeline::{run_layer_analysis, FitOptions, SweepMode, SweepSpec, Targets};
use quantscope::quant::SchemeKind;
use quantscope::reference::{self, reference_network, synthetic_calibration, sha256_hex};
use quantscope::Error;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn shipped_fixtures_match_manifest() {
    let manifest = std::fs::read_to_string(fixtures().join(reference::MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.lines().count(), 3);
    for line in manifest.lines() {
        let (digest, name) = line.split_once("  ").unwrap();
        let bytes = std::fs::read(fixtures().join(name)).unwrap();
        assert_eq!(sha256_hex(&bytes), digest, "{name}");
    }
}

#[test]
fn shipped_reference_net_loads_and_propagates_shapes() {
    let net = io::description::load_model_files(
        &fixtures().join(reference::DESCRIPTION_FILE),
        &fixtures().join(reference::WEIGHTS_FILE),
    )
    .unwrap();
    assert_eq!(net, reference_network());
    assert_eq!(net.output_shapes().last().unwrap(), &vec![10]);
    let calib = io::load_calibration(&fixtures().join(reference::CALIBRATION_FILE)).unwrap();
    assert_eq!(calib.len(), reference::CALIBRATION_SAMPLES);
    assert_eq!(calib, synthetic_calibration(reference::CALIBRATION_SAMPLES, reference::CALIBRATION_SEED));
}

#[test]
fn regenerated_fixtures_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = reference::write_fixtures(dir.path()).unwrap();
    assert_eq!(
        manifest,
        std::fs::read_to_string(fixtures().join(reference::MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn weights_container_is_little_endian_and_self_describing() {
    let net = reference_network();
    let bytes = weights_container(&net).to_bytes();
    assert_eq!(&bytes[..4], b"QSWT");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(bytes[8], 1, "little-endian tag");
    let c = Container::from_bytes(&bytes).unwrap();
    let w = c.get("conv1.weight").unwrap();
    assert_eq!(w.shape, vec![8, 3, 3, 3]);
    assert_eq!(w.payload_len(), 8 * 27 * 4);
    // first record payload: name length, name, encoding, rank, dims, length, data
    let name_len = u16::from_le_bytes(bytes[16..18].try_into().unwrap()) as usize;
    let mut pos = 18 + name_len;
    assert_eq!(&bytes[18..pos], b"conv1.weight");
    assert_eq!(bytes[pos], 0, "f32 encoding");
    assert_eq!(bytes[pos + 1], 4, "rank");
    pos += 2 + 16 + 8;
    let first = f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
    assert_eq!(first, net.layers()[0].params[0].data()[0]);
}

#[test]
fn phase_one_output_reloads_and_refits_identically() {
    let net = reference_network();
    let calib = synthetic_calibration(12, 3);
    let techniques = [SchemeKind::DynamicFixed, SchemeKind::KmeansLinear];
    let opts = FitOptions::default();
    let a = run_layer_analysis(&net, &calib, &techniques, &[6], &opts).unwrap();
    let sweep = SweepSpec::new(SweepMode::SingleLayer, Targets::Both, vec![6], techniques.to_vec());
    let meta = io::Metadata {
        seed: 0,
        batch_size: 12,
        calibration_samples: 12,
    };
    let cfg = ConfigFile::new(meta, a.stats.clone(), a.fitted.clone(), sweep);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    io::save_config(&path, &cfg).unwrap();
    let back = io::load_config(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_json(), std::fs::read_to_string(&path).unwrap());
    let again = run_layer_analysis(&net, &calib, &techniques, &[6], &FitOptions::from(&back.sweep)).unwrap();
    assert_eq!(again.fitted, back.schemes);
    assert_eq!(again.stats, back.stats);
}

#[test]
fn config_with_negative_fl_is_schema_error() {
    let net = reference_network();
    let calib = synthetic_calibration(4, 3);
    let a = run_layer_analysis(&net, &calib, &[SchemeKind::DynamicFixed], &[8], &FitOptions::default()).unwrap();
    let sweep = SweepSpec::new(SweepMode::SingleLayer, Targets::Both, vec![8], vec![SchemeKind::DynamicFixed]);
    let meta = io::Metadata {
        seed: 0,
        batch_size: 4,
        calibration_samples: 4,
    };
    let text = ConfigFile::new(meta, a.stats, a.fitted, sweep).to_json();
    let bad = text.replacen("\"fl\": 7", "\"fl\": -1", 1);
    assert_ne!(bad, text);
    let err = ConfigFile::from_json(&bad).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }), "{err}");
}

fn small_description() -> String {
    NetworkDescription::of(&reference_network()).to_json()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mutated_descriptions_parse_to_canonical_values_or_fail(pos in any::<prop::sample::Index>(), byte in 0x20u8..0x7f) {
        let mut bytes = small_description().into_bytes();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        let text = String::from_utf8(bytes).unwrap();
        if let Ok(desc) = parse_description(&text) {
            let canonical = desc.to_json();
            prop_assert_eq!(parse_description(&canonical).unwrap(), desc);
        }
    }

    #[test]
    fn mutated_weights_load_equal_or_fail(pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let net = reference_network();
        let desc = NetworkDescription::of(&net);
        let mut bytes = weights_container(&net).to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        if let Ok(c) = Container::from_bytes(&bytes) {
            prop_assert_eq!(Container::from_bytes(&c.to_bytes()).unwrap(), c.clone());
            // a changed value still loads; a changed name or shape does not
            if let Ok(loaded) = load_model(&desc, &c) {
                prop_assert_eq!(loaded.output_shapes(), net.output_shapes());
            }
        }
    }
}
