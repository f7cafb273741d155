//! Fixed-point encode/decode at several widths.
//!
//! IL comes from the largest magnitude, FL takes the remaining bits after
//! the sign bit. Values outside the range saturate.

use quantscope::quant::{fit_il, FixedParams};

fn main() -> quantscope::Result<()> {
    let values = [0.7071f32, -1.25, 3.14159, -0.001, 5.9];
    let il = fit_il(&values);
    println!("max |v| = 5.9 -> IL = {il}");
    for bw in [4u8, 8, 12, 16] {
        let p = FixedParams::fit(bw, 5.9, 32)?;
        let (lo, hi) = p.range();
        println!("\nBW={bw} IL={} FL={} step={} range=[{lo}, {hi}]", p.il, p.fl, p.step());
        for v in values {
            let code = p.quantize(v);
            let back = p.dequantize(code);
            println!("  {v:>9.5} -> code {code:>6} -> {back:>10.6}  err {:.2e}", (v - back).abs());
        }
    }

    // a format too narrow for the data saturates instead of wrapping
    let narrow = FixedParams::new(6, 1, 4)?;
    println!("\nBW=6 IL=1 FL=4: 5.9 -> {}", narrow.fake_quantize(5.9));
    Ok(())
}
