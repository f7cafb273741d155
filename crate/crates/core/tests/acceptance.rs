//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bitvec::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use quantscope::analysis::{analyze_weights, DistributionStats};
use quantscope::cli;
use quantscope::infer::{infer_quantized, Activations};
use quantscope::io::{self, load_bundle, parse_description, save_quant_config, Container};
use quantscope::network::Network;
use quantscope::ops;
use quantscope::pipeline::{
    explore, fit_one, l2norm_distance, run_layer_analysis, Evaluator, FitOptions, FittedScheme, SweepMode, SweepSpec,
    Targets,
};
use quantscope::quant::kmeans::build_kmeans_table;
use quantscope::quant::{
    fit_fl, il_for_max_abs, memory_saving, FixedParams, KMeansTable, NetworkQuantConfig, QuantScheme, RangeKind,
    SchemeKind, Target,
};
use quantscope::reference::{self, reference_network, synthetic_calibration, CALIBRATION_SAMPLES, CALIBRATION_SEED};
use quantscope::Tensor;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn calibration() -> Vec<Tensor> {
    io::load_calibration(Path::new(&fixture(reference::CALIBRATION_FILE))).unwrap()
}

fn codec_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut configs = 0;
    for bw in 2u8..=12 {
        let mut fls: Vec<i32> = [-4, -2, 0, 1, 3, 6].iter().map(|&il| fit_fl(bw, il, 32)).collect();
        fls.dedup();
        for fl in fls {
            let p = FixedParams::new(bw, bw as i32 - 1 - fl, fl).unwrap();
            let step = (-fl as f64).exp2();
            for code in p.min_code()..=p.max_code() {
                let v = p.dequantize(code);
                assert_eq!(v as f64, code as f64 * step, "bw {bw} fl {fl} code {code}");
                assert_eq!(p.quantize(v), code, "bw {bw} fl {fl} code {code}");
            }
            let (lo, hi) = p.range();
            let bound = (-(fl + 1) as f64).exp2();
            for _ in 0..100_000 {
                let x = rng.gen_range(lo..=hi) as f32;
                let err = (x as f64 - p.fake_quantize(x) as f64).abs();
                assert!(err <= bound, "bw {bw} fl {fl}: |{x} - q| = {err} > {bound}");
            }
            configs += 1;
        }
    }
    assert!(configs >= 40);
}

fn memory_model_oracle() {
    for bw in 1u32..=16 {
        let k = 1u64 << bw;
        for n in [1u64, 10, 1000] {
            for shared_bw in [8u32, 16, 32] {
                let mut layout: BitVec<u8, Lsb0> = BitVec::new();
                for i in 0..n {
                    let index = i % k;
                    for b in 0..bw {
                        layout.push((index >> b) & 1 == 1);
                    }
                }
                for entry in 0..k {
                    for b in 0..shared_bw {
                        layout.push((entry >> (b % 64)) & 1 == 1);
                    }
                }
                let m = memory_saving(32, k, shared_bw, n).unwrap();
                assert_eq!(m.total_bits, layout.len() as u64, "bw {bw} n {n} shared {shared_bw}");
                assert_eq!(m.per_value_ratio, bw as f64 / 32.0);
            }
        }
    }
}

fn moments(values: &[f32]) -> DistributionStats {
    let n = values.len() as f64;
    let min = values.iter().fold(f64::INFINITY, |m, &v| m.min(v as f64));
    let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    DistributionStats::from_moments(min, max, mean, var.sqrt())
}

fn kmeans_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let normal = Normal::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.05..2.0)).unwrap();
        let mut values: Vec<f32> = (0..500).map(|_| normal.sample(&mut rng) as f32).collect();
        values.push(normal.mean() as f32 + 6.0 * normal.std_dev() as f32);
        let stats = moments(&values);
        for bw in 1u8..=4 {
            for dist in [RangeKind::Linear, RangeKind::Gaussian] {
                let (lo, hi) = match dist {
                    RangeKind::Linear => (stats.min, stats.max),
                    RangeKind::Gaussian => (stats.mean - 3.0 * stats.std, stats.mean + 3.0 * stats.std),
                };
                let table_fl = fit_fl(16, il_for_max_abs(lo.abs().max(hi.abs()) as f32), 20);
                let table = build_kmeans_table(&stats, bw, dist, 3.0, 16, table_fl).unwrap();
                assert_eq!((table.range_lo, table.range_hi), (lo, hi), "trial {trial} bw {bw} {dist:?}");

                let k = 1u64 << bw;
                let width = (hi - lo) / k as f64;
                let edges: Vec<f64> = (0..=k).map(|i| lo + i as f64 * width).collect();
                let centers = table.centers();
                assert_eq!(centers.len() as u64, k);
                let tol = (-(table.table.fl + 1) as f64).exp2();
                for i in 0..k as usize {
                    let mid = (edges[i] + edges[i + 1]) / 2.0;
                    assert!(
                        (centers[i] as f64 - mid).abs() <= tol,
                        "trial {trial} bw {bw} {dist:?} center {i}: {} vs {mid}",
                        centers[i]
                    );
                }
                let (indices, recon) = table.quantize(&Tensor::vector(values.clone()));
                for (j, &v) in values.iter().enumerate() {
                    let want = (1..k as usize).filter(|&i| v as f64 >= edges[i]).count() as u32;
                    assert_eq!(indices[j], want, "trial {trial} bw {bw} {dist:?} value {v}");
                    assert_eq!(recon.data()[j], centers[want as usize]);
                }
            }
        }
    }
}

fn l2_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for pair in 0..100 {
        let (c, h, w) = if pair == 0 {
            (8, 32, 32)
        } else {
            (rng.gen_range(1..=8), rng.gen_range(1..=32), rng.gen_range(1..=32))
        };
        let scale = 10f32.powi(rng.gen_range(-3..=3));
        let mut gen = |_| rng.gen_range(-1.0f32..1.0) * scale;
        let a = Tensor::from_fn(vec![c, h, w], &mut gen);
        let b = Tensor::from_fn(vec![c, h, w], &mut gen);
        let mut sum = 0.0f64;
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let i = (ci * h + y) * w + x;
                    let d = a.data()[i] as f64 - b.data()[i] as f64;
                    sum += d * d;
                }
            }
        }
        let want = sum.sqrt();
        let got = l2norm_distance(&a, &b).unwrap();
        assert!((got - want).abs() <= 1e-6 * want, "pair {pair} [{c},{h},{w}]: {got} vs {want}");
    }
}

struct CliRun {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

fn cli_run(args: &[&str]) -> CliRun {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("quantscope").chain(args.iter().copied()), &mut out, &mut err);
    CliRun {
        code,
        stdout: out,
        stderr: String::from_utf8_lossy(&err).into_owned(),
    }
}

fn cli_ok(args: &[&str]) -> Vec<u8> {
    let r = cli_run(args);
    assert_eq!(r.code, cli::EXIT_OK, "{args:?}: {}", r.stderr);
    r.stdout
}

fn full_pipeline(dir: &Path) -> Vec<Vec<u8>> {
    let p = |name: &str| dir.join(name).display().to_string();
    let (model, weights, calib) = (
        fixture(reference::DESCRIPTION_FILE),
        fixture(reference::WEIGHTS_FILE),
        fixture(reference::CALIBRATION_FILE),
    );
    let (cfg, rep, sel) = (p("config.json"), p("report.json"), p("selected.json"));
    let model_args = ["--model", model.as_str(), "--weights", weights.as_str()];
    let mut stdout = Vec::new();
    let mut args = vec!["analyze"];
    args.extend(model_args);
    args.extend([
        "--calib",
        &calib,
        "--out",
        &cfg,
        "--bits",
        "4,8,16",
        "--techniques",
        "dynamic_fixed,standard_fixed,kmeans_linear,kmeans_gaussian",
    ]);
    stdout.push(cli_ok(&args));
    let mut args = vec!["explore"];
    args.extend(model_args);
    args.extend(["--config", &cfg, "--calib", &calib, "--out", &rep]);
    stdout.push(cli_ok(&args));
    stdout.push(cli_ok(&["select", "--report", &rep, "--max-distance", "0.05", "--out", &sel]));
    let mut files: Vec<Vec<u8>> = [&cfg, &rep, &sel].iter().map(|f| std::fs::read(f).unwrap()).collect();
    files.extend(stdout);
    files
}

fn pipeline_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = full_pipeline(a.path());
    let second = full_pipeline(b.path());
    let names = ["config", "report", "selection", "analyze stdout", "explore stdout", "select stdout"];
    for ((x, y), name) in first.iter().zip(&second).zip(names) {
        assert!(!x.is_empty(), "{name} is empty");
        assert!(x == y, "{name} differs between runs");
    }
}

fn monotone_degradation() {
    let net = reference_network();
    let calib = calibration();
    let bits = [4u8, 8, 12, 16];
    let a = run_layer_analysis(&net, &calib, &[SchemeKind::StandardFixed], &bits, &FitOptions::default()).unwrap();
    let eval = Evaluator::new(&net, &calib).unwrap();
    let spec = SweepSpec::new(SweepMode::WholeNetwork, Targets::Both, bits.to_vec(), vec![SchemeKind::StandardFixed]);
    let report = explore(&eval, &a.fitted, &spec).unwrap();
    let d = |bw: u8| report.rows.iter().find(|r| r.bw == bw).unwrap().result.final_distance;
    let (d4, d8, d12, d16) = (d(4), d(8), d(12), d(16));
    assert!(d16 <= d12 && d12 <= d8 && d8 <= d4, "not monotone: 4:{d4} 8:{d8} 12:{d12} 16:{d16}");
    assert!(d16 < 0.01 * d4, "16-bit distance {d16} is not below 1% of 4-bit {d4}");
}

fn conv2_weights(net: &Network) -> Result<FittedScheme, quantscope::Error> {
    let calib = &synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED);
    let stats = analyze_weights(net, 8, 20).into_iter().find(|s| s.layer_id == "conv2").unwrap();
    let eval = Evaluator::new(net, calib)?;
    fit_one(&eval, &stats, SchemeKind::DynamicFixed, 8, &FitOptions::default())
}

fn range_factor() {
    let net = reference_network();
    let mut layers = net.layers().to_vec();
    let idx = net.index_of("conv2").unwrap();
    for t in &mut layers[idx].params {
        *t = t.map(|v| v * 64.0);
    }
    let scaled = Network::new(net.input_shape().to_vec(), layers).unwrap();
    let il = |n: &Network| analyze_weights(n, 8, 20).into_iter().find(|s| s.layer_id == "conv2").unwrap().suggested_il;
    assert_eq!(il(&scaled), il(&net) + 6);
    let (before, after) = (conv2_weights(&net).unwrap(), conv2_weights(&scaled).unwrap());
    assert_eq!(after.scheme.fixed_params().unwrap().il, before.scheme.fixed_params().unwrap().il + 6);
    assert!(
        after.distance > before.distance,
        "distance did not grow: {} -> {}",
        before.distance,
        after.distance
    );
}

fn relu_non_expansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for pair in 0..1000 {
        let shape = vec![rng.gen_range(1..=4), rng.gen_range(1..=12), rng.gen_range(1..=12)];
        let scale = 10f32.powi(rng.gen_range(-2..=2));
        let mut gen = |_| rng.gen_range(-1.0f32..1.0) * scale;
        let a = Tensor::from_fn(shape.clone(), &mut gen);
        let b = Tensor::from_fn(shape, &mut gen);
        let before = l2norm_distance(&a, &b).unwrap();
        let after = l2norm_distance(&ops::relu(&a), &ops::relu(&b)).unwrap();
        assert!(after <= before, "pair {pair}: {after} > {before}");
    }
}

/// Scheme for one group at a given cap, built straight from the codecs.
fn scheme_at_cap(technique: SchemeKind, bw: u8, stats: &DistributionStats, cap: i32) -> QuantScheme {
    match technique {
        SchemeKind::DynamicFixed => {
            let il = il_for_max_abs(stats.max_abs() as f32);
            QuantScheme::DynamicFixed(FixedParams::new(bw, il, fit_fl(bw, il, cap)).unwrap())
        }
        SchemeKind::KmeansLinear => {
            let il = il_for_max_abs(stats.min.abs().max(stats.max.abs()) as f32);
            let table = FixedParams::new(16, il, fit_fl(16, il, cap)).unwrap();
            QuantScheme::Kmeans(KMeansTable::from_range(stats.min, stats.max, bw, RangeKind::Linear, table).unwrap())
        }
        other => panic!("no oracle for {other:?}"),
    }
}

fn grid_optimality() {
    let net = reference_network();
    let calib = calibration();
    let runs = [(SchemeKind::DynamicFixed, 4u8), (SchemeKind::DynamicFixed, 8), (SchemeKind::KmeansLinear, 4)];
    let eval = Evaluator::new(&net, &calib).unwrap();
    let mut checked = 0;
    for (technique, bw) in runs {
        let a = run_layer_analysis(&net, &calib, &[technique], &[bw], &FitOptions::default()).unwrap();
        for f in a.fitted.iter() {
            let stats = a.stats.iter().find(|s| s.layer_id == f.layer_id && s.target == f.target).unwrap();
            let point = net.activation_point(net.index_of(&f.layer_id).unwrap());
            let mut grid_min = f64::INFINITY;
            for cap in 8..=20 {
                let scheme = scheme_at_cap(technique, bw, stats, cap);
                let cfg = NetworkQuantConfig::new("oracle").with(&f.layer_id, f.target, scheme);
                let d = eval.distance_at(&cfg, point).unwrap();
                assert!(
                    d >= f.distance,
                    "{} {} {technique:?} bw {bw}: cap {cap} gives {d} < fitted {}",
                    f.layer_id,
                    f.target,
                    f.distance
                );
                grid_min = grid_min.min(d);
            }
            assert_eq!(grid_min, f.distance, "{} {}: fitted distance is not on the grid", f.layer_id, f.target);
            checked += 1;
        }
    }
    assert_eq!(checked, 3 * 11);
}

fn bits_of(acts: &[Activations]) -> Vec<u32> {
    acts.iter().flatten().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
}

fn config_from(fitted: &[FittedScheme]) -> NetworkQuantConfig {
    let mut cfg = NetworkQuantConfig::new("acceptance");
    for f in fitted {
        cfg.set(&f.layer_id, f.target, f.scheme.clone());
    }
    cfg
}

fn bundle_fidelity() {
    let net = reference_network();
    let calib = calibration();
    let fit_batch = &calib[..10];
    let fixed = run_layer_analysis(&net, fit_batch, &[SchemeKind::DynamicFixed], &[8], &FitOptions::default()).unwrap();
    let kmeans = run_layer_analysis(&net, fit_batch, &[SchemeKind::KmeansLinear], &[4], &FitOptions::default()).unwrap();
    let configs = [config_from(&fixed.fitted.0), config_from(&kmeans.fitted.0)];
    assert!(matches!(configs[1].get("fc3", Target::Weights), Some(QuantScheme::Kmeans(_))));

    let desc_path = fixture(reference::DESCRIPTION_FILE);
    let weights_path = fixture(reference::WEIGHTS_FILE);
    let desc = parse_description(&std::fs::read_to_string(&desc_path).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, cfg) in configs.iter().enumerate() {
        let cfg_path = dir.path().join(format!("quant{i}.json"));
        save_quant_config(&cfg_path, cfg).unwrap();
        let out = dir.path().join(format!("bundle{i}.bin"));
        let (cfg_s, out_s) = (cfg_path.display().to_string(), out.display().to_string());
        cli_ok(&["quantize", "--model", &desc_path, "--weights", &weights_path, "--config", &cfg_s, "--out", &out_s]);

        let bundle = Container::from_bytes(&std::fs::read(&out).unwrap()).unwrap();
        let (loaded, act) = load_bundle(&desc, &bundle).unwrap();
        let reloaded = infer_quantized(&loaded, &act, &calib).unwrap();
        let direct = infer_quantized(&net, cfg, &calib).unwrap();
        assert!(bits_of(&reloaded) == bits_of(&direct), "config {i}: reloaded inference differs");
    }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("codec exhaustive oracle", codec_exhaustive),
        ("memory model bit-layout oracle", memory_model_oracle),
        ("k-means table brute force", kmeans_brute_force),
        ("L2 distance triple loop", l2_triple_loop),
        ("pipeline determinism", pipeline_determinism),
        ("monotone degradation", monotone_degradation),
        ("range factor", range_factor),
        ("ReLU non-expansive", relu_non_expansive),
        ("FL grid optimality", grid_optimality),
        ("bundle fidelity", bundle_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {:>2} {name}: PASS ({secs:.1}s)", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
