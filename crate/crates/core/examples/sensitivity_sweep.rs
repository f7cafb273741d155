//! Single-layer sweeps on the reference network: which layers tolerate low
//! precision, and whether weights or activations are more sensitive.
//!
//! ```bash
//! cargo run --release --example sensitivity_sweep
//! ```

use quantscope::io::render_table;
use quantscope::pipeline::{explore, run_layer_analysis, Evaluator, FitOptions, SweepMode, SweepSpec, Targets};
use quantscope::quant::SchemeKind;
use quantscope::reference::{reference_network, synthetic_calibration, CALIBRATION_SAMPLES, CALIBRATION_SEED};

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let calib = synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED);
    let bits = vec![4u8, 6, 8];
    let techniques = vec![SchemeKind::DynamicFixed];
    let analysis = run_layer_analysis(&net, &calib, &techniques, &bits, &FitOptions::default())?;
    let eval = Evaluator::new(&net, &calib)?;

    for targets in [Targets::Weights, Targets::Activations] {
        let spec = SweepSpec::new(SweepMode::SingleLayer, targets, bits.clone(), techniques.clone())
            .with_layers(["conv1", "conv2", "fc3"]);
        let report = explore(&eval, &analysis.fitted, &spec)?;
        println!("== {targets} ==");
        print!("{}", render_table(&report));
        println!();
    }
    Ok(())
}
