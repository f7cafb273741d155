//! Select a configuration under a distance bound, write the quantized
//! bundle, reload it and check it reproduces the fake-quantized outputs.

use quantscope::infer::infer_quantized;
use quantscope::io::{load_bundle, quantize_bundle, weights_container, Container, NetworkDescription};
use quantscope::pipeline::{
    explore, run_layer_analysis, select_best, Constraint, Evaluator, FitOptions, Selection, SweepMode, SweepSpec,
    Targets,
};
use quantscope::quant::SchemeKind;
use quantscope::reference::{reference_network, synthetic_calibration, CALIBRATION_SAMPLES, CALIBRATION_SEED};

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let calib = synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED);
    let bits = vec![4u8, 6, 8, 12];
    let techniques = vec![SchemeKind::DynamicFixed, SchemeKind::KmeansLinear];
    let analysis = run_layer_analysis(&net, &calib, &techniques, &bits, &FitOptions::default())?;
    let eval = Evaluator::new(&net, &calib)?;
    let spec = SweepSpec::new(SweepMode::WholeNetwork, Targets::Both, bits, techniques);
    let report = explore(&eval, &analysis.fitted, &spec)?;

    for bound in [0.001, 0.05, 0.3] {
        match select_best(&report, Constraint::MaxDistance(bound)) {
            Selection::Feasible { row, .. } => {
                let r = &report.rows[row];
                println!(
                    "distance <= {bound}: {} at {} bits, distance {:.3e}, combined saving {:.2}%",
                    r.technique, r.bw, r.result.final_distance, r.result.combined_saving_pct
                );
            }
            Selection::Infeasible => println!("distance <= {bound}: no feasible configuration"),
        }
    }

    let selection = select_best(&report, Constraint::MaxDistance(0.05));
    let cfg = selection.config().expect("a feasible configuration");
    let bundle = quantize_bundle(&net, cfg)?.to_bytes();
    let float = weights_container(&net).to_bytes();
    println!("\nfloat weights {} bytes, bundle {} bytes", float.len(), bundle.len());

    let (loaded, act) = load_bundle(&NetworkDescription::of(&net), &Container::from_bytes(&bundle)?)?;
    let same = infer_quantized(&loaded, &act, &calib)? == infer_quantized(&net, cfg, &calib)?;
    println!("reloaded bundle reproduces fake-quantized outputs: {same}");
    Ok(())
}
