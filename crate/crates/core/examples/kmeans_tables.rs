//! Uniform k-means codebooks over the reference network's conv1 weights,
//! with a linear range and a mean ± 3σ range.

use quantscope::analysis::{analyze_weights, weight_values};
use quantscope::quant::{build_kmeans_table, RangeKind};
use quantscope::reference::reference_network;
use quantscope::Tensor;

fn main() -> quantscope::Result<()> {
    let net = reference_network();
    let stats = analyze_weights(&net, 16, 20);
    let conv1 = stats.iter().find(|s| s.layer_id == "conv1").expect("conv1 weights");
    let values = Tensor::vector(weight_values(&net, "conv1")?);
    println!(
        "conv1 weights: n={} min={:.4} max={:.4} mean={:.4} std={:.4}",
        values.len(),
        conv1.min,
        conv1.max,
        conv1.mean,
        conv1.std
    );
    for dist in [RangeKind::Linear, RangeKind::Gaussian] {
        for bw in [2u8, 3, 4] {
            let table = build_kmeans_table(conv1, bw, dist, 3.0, 16, 14)?;
            let (indices, recon) = table.quantize(&values);
            let mse: f64 = values
                .data()
                .iter()
                .zip(recon.data())
                .map(|(a, b)| ((a - b) as f64).powi(2))
                .sum::<f64>()
                / values.len() as f64;
            let mut used = indices.clone();
            used.sort_unstable();
            used.dedup();
            println!(
                "{dist:?} bw={bw}: range [{:.4}, {:.4}] K={} used={} mse={mse:.3e}",
                table.range_lo,
                table.range_hi,
                table.k(),
                used.len()
            );
            if bw == 2 {
                let centers: Vec<String> = table.centers().iter().map(|c| format!("{c:.4}")).collect();
                println!("  centers {}", centers.join(" "));
            }
        }
    }
    Ok(())
}
