//! The fractional-length grid search for one layer-target, printing the
//! distance of every candidate.

use quantscope::analysis::analyze_activations;
use quantscope::pipeline::{fit_one, fl_candidates, Evaluator, FitOptions};
use quantscope::quant::{il_for_max_abs, FixedParams, NetworkQuantConfig, QuantScheme, SchemeKind, Target};
use quantscope::reference::{reference_network, synthetic_calibration, CALIBRATION_SEED};

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let calib = synthetic_calibration(20, CALIBRATION_SEED);
    let eval = Evaluator::new(&net, &calib)?;
    let opts = FitOptions::default();
    let stats = analyze_activations(&net, &calib, 16, opts.fl_range.hi)?;
    let fc3 = stats.iter().find(|s| s.layer_id == "fc3").expect("fc3 activations");
    let il = il_for_max_abs(fc3.max_abs() as f32);
    let point = net.activation_point(net.index_of("fc3")?);

    for bw in [8u8, 16] {
        println!("fc3 activations, BW={bw}, IL={il}");
        for fl in fl_candidates(bw, il, opts.fl_range) {
            let scheme = QuantScheme::DynamicFixed(FixedParams::new(bw, il, fl)?);
            let cfg = NetworkQuantConfig::new("probe").with("fc3", Target::Activations, scheme);
            println!("  FL={fl:>2}  distance {:.4e}", eval.distance_at(&cfg, point)?);
        }
        let best = fit_one(&eval, fc3, SchemeKind::DynamicFixed, bw, &opts)?;
        println!("  chosen: {}\n", best.scheme.summary());
    }
    Ok(())
}
