//! The shipped reference network and its synthetic calibration batch.
//!
//! An eight-layer conv net on `[3, 16, 16]` inputs:
//! conv1 → bn1 → relu1 → pool1 → conv2 → relu2 → fc3 → prob.
//! Weights and calibration samples come from fixed seeds, so every run
//! rebuilds the same bytes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::{description::save_model, read_file, save_calibration};
use crate::network::{Layer, LayerKind, Network};
use crate::tensor::Tensor;

pub const REFERENCE_SEED: u64 = 20180;
pub const CALIBRATION_SEED: u64 = 7;
pub const CALIBRATION_SAMPLES: usize = 50;
pub const INPUT_SHAPE: [usize; 3] = [3, 16, 16];

pub const DESCRIPTION_FILE: &str = "reference.json";
pub const WEIGHTS_FILE: &str = "reference.weights";
pub const CALIBRATION_FILE: &str = "calibration.bin";
pub const MANIFEST_FILE: &str = "MANIFEST.sha256";

fn normal(rng: &mut ChaCha8Rng, shape: Vec<usize>, std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    Tensor::from_fn(shape, |_| dist.sample(rng) as f32)
}

fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

pub fn reference_network() -> Network {
    reference_network_with_seed(REFERENCE_SEED)
}

/// He-scaled random weights; the classifier is scaled up so the softmax
/// output is far from uniform.
pub fn reference_network_with_seed(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv1 = LayerKind::Conv2d {
        in_channels: 3,
        out_channels: 8,
        kernel: 3,
        stride: 1,
        padding: 1,
    };
    let conv2 = LayerKind::Conv2d {
        in_channels: 8,
        out_channels: 16,
        kernel: 3,
        stride: 2,
        padding: 1,
    };
    let fc3 = LayerKind::FullyConnected {
        in_features: 256,
        out_features: 10,
    };
    let layers = vec![
        Layer::new(
            "conv1",
            conv1,
            vec![
                normal(&mut rng, vec![8, 3, 3, 3], (2.0f64 / 27.0).sqrt()),
                uniform(&mut rng, vec![8], -0.05, 0.05),
            ],
        ),
        Layer::new(
            "bn1",
            LayerKind::BatchNorm {
                channels: 8,
                epsilon: 1e-5,
            },
            vec![
                uniform(&mut rng, vec![8], 0.8, 1.2),
                uniform(&mut rng, vec![8], -0.1, 0.1),
                uniform(&mut rng, vec![8], -0.1, 0.1),
                uniform(&mut rng, vec![8], 0.5, 1.5),
            ],
        ),
        Layer::relu("relu1"),
        Layer::max_pool("pool1", 2, 2),
        Layer::new(
            "conv2",
            conv2,
            vec![
                normal(&mut rng, vec![16, 8, 3, 3], (2.0f64 / 72.0).sqrt()),
                uniform(&mut rng, vec![16], -0.05, 0.05),
            ],
        ),
        Layer::relu("relu2"),
        Layer::new(
            "fc3",
            fc3,
            vec![
                normal(&mut rng, vec![10, 256], 2.0 * (2.0f64 / 256.0).sqrt()),
                uniform(&mut rng, vec![10], -0.1, 0.1),
            ],
        ),
        Layer::softmax("prob"),
    ];
    Network::new(INPUT_SHAPE.to_vec(), layers).expect("reference network is well formed")
}

/// `n` smooth random images with additive noise, values roughly in [-1.5, 1.5].
pub fn synthetic_calibration(n: usize, seed: u64) -> Vec<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("positive std");
    let [c, h, w] = INPUT_SHAPE;
    (0..n)
        .map(|_| {
            let waves: Vec<[f32; 4]> = (0..c)
                .map(|_| {
                    [
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(0.1..0.8),
                        rng.gen_range(0.1..0.8),
                        rng.gen_range(0.0..std::f32::consts::TAU),
                    ]
                })
                .collect();
            Tensor::from_fn(vec![c, h, w], |i| {
                let (ch, y, x) = (i / (h * w), (i / w) % h, i % w);
                let [amp, fy, fx, phase] = waves[ch];
                amp * (fy * y as f32 + fx * x as f32 + phase).sin() + noise.sample(&mut rng) as f32
            })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes description, weights, calibration batch and a checksum manifest
/// into `dir`, returning the manifest text.
pub fn write_fixtures(dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let net = reference_network();
    save_model(&net, &dir.join(DESCRIPTION_FILE), &dir.join(WEIGHTS_FILE))?;
    save_calibration(
        &dir.join(CALIBRATION_FILE),
        &synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED),
    )?;
    let mut manifest = String::new();
    for name in [DESCRIPTION_FILE, WEIGHTS_FILE, CALIBRATION_FILE] {
        let digest = sha256_hex(&read_file(&dir.join(name))?);
        manifest.push_str(&format!("{digest}  {name}\n"));
    }
    crate::io::write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    Ok(manifest)
}
