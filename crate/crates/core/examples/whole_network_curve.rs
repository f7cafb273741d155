//! Whole-network sweeps: final-layer distance against bit width for every
//! technique, written as `bw,final_distance` curves.

use quantscope::io::{curve_csv, render_table};
use quantscope::pipeline::{explore, run_layer_analysis, Evaluator, FitOptions, SweepMode, SweepSpec, Targets};
use quantscope::quant::SchemeKind;
use quantscope::reference::{reference_network, synthetic_calibration, CALIBRATION_SAMPLES, CALIBRATION_SEED};

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let calib = synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED);
    let bits = vec![4u8, 6, 8, 10, 12, 16];
    let analysis = run_layer_analysis(&net, &calib, &SchemeKind::ALL, &bits, &FitOptions::default())?;
    let eval = Evaluator::new(&net, &calib)?;

    for technique in SchemeKind::ALL {
        let spec = SweepSpec::new(SweepMode::WholeNetwork, Targets::Both, bits.clone(), vec![technique]);
        let report = explore(&eval, &analysis.fitted, &spec)?;
        println!("== {technique} ==");
        print!("{}", curve_csv(&report));
        if technique == SchemeKind::StandardFixed {
            print!("{}", render_table(&report));
        }
        println!();
    }
    Ok(())
}
