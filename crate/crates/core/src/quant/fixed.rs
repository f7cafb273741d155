//! Signed fixed-point codec and integer/fractional length selection.
//!
//! A value is stored as a two's-complement code of `bw` bits (sign included)
//! and decoded as `code / 2^fl`. The integer length `il` records how many
//! bits cover the integer range of the data; it may be negative for groups
//! whose magnitude is well below one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BW: u8 = 2;
pub const MAX_BW: u8 = 32;
pub const MAX_FL: i32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub bw: u8,
    pub il: i32,
    pub fl: i32,
}

impl FixedParams {
    pub fn new(bw: u8, il: i32, fl: i32) -> Result<Self> {
        let p = Self { bw, il, fl };
        p.validate()?;
        Ok(p)
    }

    /// IL from the data, FL from the bit budget capped at `cap`.
    pub fn fit(bw: u8, max_abs: f32, cap: i32) -> Result<Self> {
        let il = il_for_max_abs(max_abs);
        Self::new(bw, il, fit_fl(bw, il, cap))
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_BW..=MAX_BW).contains(&self.bw) {
            return Err(Error::InvalidArgument(format!(
                "bit width {} outside [{MIN_BW}, {MAX_BW}]",
                self.bw
            )));
        }
        if !(0..=MAX_FL).contains(&self.fl) {
            return Err(Error::InvalidArgument(format!(
                "fractional length {} outside [0, {MAX_FL}]",
                self.fl
            )));
        }
        Ok(())
    }

    pub fn min_code(&self) -> i64 {
        -(1i64 << (self.bw - 1))
    }

    pub fn max_code(&self) -> i64 {
        (1i64 << (self.bw - 1)) - 1
    }

    /// Quantization step, `2^-fl`.
    pub fn step(&self) -> f64 {
        (-self.fl as f64).exp2()
    }

    pub fn quantize(&self, v: f32) -> i64 {
        quantize_fixed(v, *self)
    }

    pub fn dequantize(&self, code: i64) -> f32 {
        dequantize_fixed(code, *self)
    }

    /// Round trip through the codec.
    pub fn fake_quantize(&self, v: f32) -> f32 {
        self.dequantize(self.quantize(v))
    }

    /// Smallest and largest decodable values.
    pub fn range(&self) -> (f64, f64) {
        let s = self.step();
        (self.min_code() as f64 * s, self.max_code() as f64 * s)
    }
}

/// Smallest integer `il` with `2^il >= max_abs`; 0 for all-zero data.
pub fn il_for_max_abs(max_abs: f32) -> i32 {
    let m = max_abs.abs() as f64;
    if m == 0.0 || !m.is_finite() {
        return 0;
    }
    let mut il = m.log2().ceil() as i32;
    // log2 of non-powers of two may be off by an ulp; settle exactly
    while (il as f64 - 1.0).exp2() >= m {
        il -= 1;
    }
    while (il as f64).exp2() < m {
        il += 1;
    }
    il
}

/// Integer length covering every value of the group.
pub fn fit_il(values: &[f32]) -> i32 {
    let m = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    il_for_max_abs(m)
}

/// `min(bw - 1 - il, cap)`, clamped to `[0, MAX_FL]`. One bit is the sign.
pub fn fit_fl(bw: u8, il: i32, cap: i32) -> i32 {
    (bw as i32 - 1 - il).min(cap).clamp(0, MAX_FL)
}

/// Round-half-away-from-zero of `v * 2^fl`, saturated to the code range.
pub fn quantize_fixed(v: f32, p: FixedParams) -> i64 {
    quantize_fixed_f64(v as f64, p)
}

pub(crate) fn quantize_fixed_f64(v: f64, p: FixedParams) -> i64 {
    if v.is_nan() {
        return 0;
    }
    let scaled = (v * (p.fl as f64).exp2()).round();
    scaled.clamp(p.min_code() as f64, p.max_code() as f64) as i64
}

pub fn dequantize_fixed(code: i64, p: FixedParams) -> f32 {
    (code as f64 * (-p.fl as f64).exp2()) as f32
}
