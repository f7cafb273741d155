//! Uniform-step codebook quantizers ("k-means" with equal intervals).
//!
//! The data range is cut into `K = 2^bw` equal intervals; every value is
//! replaced by the index of its interval, and the index is decoded through a
//! table holding each interval's midpoint. The table itself is stored in
//! fixed point. Linear tables span `[min, max]`; Gaussian tables span
//! `mean ± sigma_mult·std` and saturate everything outside.

use serde::{Deserialize, Serialize};

use crate::analysis::DistributionStats;
use crate::error::{Error, Result};
use crate::quant::fixed::{il_for_max_abs, quantize_fixed_f64, FixedParams};
use crate::tensor::Tensor;

pub const MAX_KMEANS_BW: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKind {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansTable {
    pub bw: u8,
    pub dist: RangeKind,
    pub range_lo: f64,
    pub range_hi: f64,
    /// Fixed-point format of the shared values.
    pub table: FixedParams,
    /// Shared values as fixed-point codes; a single entry for a degenerate range.
    pub center_codes: Vec<i64>,
}

impl KMeansTable {
    /// Builds the table for `[lo, hi]` with `2^bw` intervals.
    pub fn from_range(lo: f64, hi: f64, bw: u8, dist: RangeKind, table: FixedParams) -> Result<Self> {
        if !(1..=MAX_KMEANS_BW).contains(&bw) {
            return Err(Error::InvalidArgument(format!(
                "k-means bit width {bw} outside [1, {MAX_KMEANS_BW}]"
            )));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidArgument(format!("invalid k-means range [{lo}, {hi}]")));
        }
        table.validate()?;
        let center_codes = if lo == hi {
            vec![quantize_fixed_f64(lo, table)]
        } else {
            let k = 1usize << bw;
            let step = (hi - lo) / k as f64;
            (0..k)
                .map(|i| quantize_fixed_f64(lo + (i as f64 + 0.5) * step, table))
                .collect()
        };
        Ok(Self {
            bw,
            dist,
            range_lo: lo,
            range_hi: hi,
            table,
            center_codes,
        })
    }

    /// Number of intervals, `2^bw`.
    pub fn k(&self) -> u64 {
        1u64 << self.bw
    }

    pub fn is_degenerate(&self) -> bool {
        self.center_codes.len() == 1
    }

    pub fn step(&self) -> f64 {
        (self.range_hi - self.range_lo) / self.k() as f64
    }

    /// Decoded shared values.
    pub fn centers(&self) -> Vec<f32> {
        self.center_codes
            .iter()
            .map(|&c| self.table.dequantize(c))
            .collect()
    }

    /// Interval index of `v`; values outside the range saturate to the end intervals.
    pub fn index_of(&self, v: f32) -> u32 {
        if self.is_degenerate() || v.is_nan() {
            return 0;
        }
        let last = self.k() - 1;
        let v = v as f64;
        let guess = ((v - self.range_lo) / self.step()).floor();
        let mut pos = if guess <= 0.0 { 0 } else { (guess as u64).min(last) };
        // settle against the edges themselves so rounding in the division
        // never moves a value across a boundary
        while pos > 0 && v < self.edge(pos) {
            pos -= 1;
        }
        while pos < last && v >= self.edge(pos + 1) {
            pos += 1;
        }
        pos as u32
    }

    /// Lower edge of interval `i`, `lo + i·step`.
    pub fn edge(&self, i: u64) -> f64 {
        self.range_lo + i as f64 * self.step()
    }

    pub fn center(&self, index: u32) -> f32 {
        self.table.dequantize(self.center_codes[index as usize])
    }

    pub fn quantize(&self, values: &Tensor) -> (Vec<u32>, Tensor) {
        quantize_kmeans(values, self)
    }

    pub fn fake_quantize(&self, v: f32) -> f32 {
        self.center(self.index_of(v))
    }

    pub fn validate(&self) -> Result<()> {
        self.table.validate()?;
        let expected = if self.range_lo == self.range_hi {
            1
        } else {
            self.k() as usize
        };
        let codes_fit = self
            .center_codes
            .iter()
            .all(|c| (self.table.min_code()..=self.table.max_code()).contains(c));
        if !(1..=MAX_KMEANS_BW).contains(&self.bw)
            || !(self.range_lo.is_finite() && self.range_hi.is_finite())
            || self.range_lo > self.range_hi
            || !codes_fit
            || self.center_codes.len() != expected
        {
            return Err(Error::InvalidArgument(format!(
                "inconsistent k-means table (bw {}, {} centers)",
                self.bw,
                self.center_codes.len()
            )));
        }
        Ok(())
    }
}

/// Quantization range implied by a group's statistics.
pub fn kmeans_range(stats: &DistributionStats, dist: RangeKind, sigma_mult: f64) -> (f64, f64) {
    match dist {
        RangeKind::Linear => (stats.min, stats.max),
        RangeKind::Gaussian => (
            stats.mean - sigma_mult * stats.std,
            stats.mean + sigma_mult * stats.std,
        ),
    }
}

/// Table format for the shared values of `[lo, hi]` at the given FL.
pub fn table_params(lo: f64, hi: f64, table_bw: u8, table_fl: i32) -> Result<FixedParams> {
    let il = il_for_max_abs(lo.abs().max(hi.abs()) as f32);
    FixedParams::new(table_bw, il, table_fl)
}

pub fn build_kmeans_table(
    stats: &DistributionStats,
    bw: u8,
    dist: RangeKind,
    sigma_mult: f64,
    table_bw: u8,
    table_fl: i32,
) -> Result<KMeansTable> {
    let (lo, hi) = kmeans_range(stats, dist, sigma_mult);
    KMeansTable::from_range(lo, hi, bw, dist, table_params(lo, hi, table_bw, table_fl)?)
}

pub fn quantize_kmeans(values: &Tensor, table: &KMeansTable) -> (Vec<u32>, Tensor) {
    let indices: Vec<u32> = values.data().iter().map(|&v| table.index_of(v)).collect();
    let centers = table.centers();
    let data = indices.iter().map(|&i| centers[i as usize]).collect();
    let recon = Tensor::new(values.shape().to_vec(), data).expect("same shape");
    (indices, recon)
}
