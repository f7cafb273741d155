//! Storage cost of k-means indices plus their shared table against 32-bit floats.

use quantscope::quant::memory_saving;

fn main() -> quantscope::Result<()> {
    println!("{:>8} {:>6} {:>12} {:>14} {:>10}", "n", "K", "ratio", "total bits", "saving %");
    for n in [1_000u64, 100_000, 10_000_000] {
        for k in [4u64, 16, 64, 256] {
            let m = memory_saving(32, k, 16, n)?;
            let saving = 100.0 * (1.0 - m.total_bits as f64 / (n * 32) as f64);
            println!("{n:>8} {k:>6} {:>12.5} {:>14} {saving:>10.2}", m.per_value_ratio, m.total_bits);
        }
    }
    Ok(())
}
