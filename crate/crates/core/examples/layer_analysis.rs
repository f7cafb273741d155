//! Phase 1 on the reference network: statistics for every layer-target and
//! dynamic fixed-point parameters fitted at 8 bits.

use quantscope::pipeline::{run_layer_analysis, FitOptions};
use quantscope::quant::SchemeKind;
use quantscope::reference::{reference_network, synthetic_calibration, CALIBRATION_SAMPLES, CALIBRATION_SEED};

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let calib = synthetic_calibration(CALIBRATION_SAMPLES, CALIBRATION_SEED);
    let analysis = run_layer_analysis(&net, &calib, &[SchemeKind::DynamicFixed], &[8], &FitOptions::default())?;

    println!("{:<8} {:<12} {:>10} {:>10} {:>10} {:>10}", "layer", "target", "min", "max", "mean", "std");
    for s in &analysis.stats {
        println!(
            "{:<8} {:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            s.layer_id,
            s.target.as_str(),
            s.min,
            s.max,
            s.mean,
            s.std
        );
    }
    println!("\nfitted at 8 bits:");
    for f in analysis.fitted.iter() {
        println!(
            "  {:<8} {:<12} {:<14} distance {:.3e}",
            f.layer_id,
            f.target.as_str(),
            f.scheme.summary(),
            f.distance
        );
    }
    Ok(())
}
