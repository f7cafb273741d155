//! Storage and traffic accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySaving {
    /// Index width over the original width, `log2(k) / original_bw`.
    pub per_value_ratio: f64,
    /// Index payload plus the shared-value table, in bits.
    pub total_bits: u64,
}

/// Cost of storing `n_values` as indices into a `k`-entry table of
/// `shared_bw`-bit values. `k` must be a power of two.
pub fn memory_saving(original_bw: u32, k: u64, shared_bw: u32, n_values: u64) -> Result<MemorySaving> {
    if !k.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "table size {k} is not a power of two"
        )));
    }
    if original_bw == 0 {
        return Err(Error::InvalidArgument("original bit width must be positive".into()));
    }
    let index_bits = k.trailing_zeros() as u64;
    Ok(MemorySaving {
        per_value_ratio: index_bits as f64 / original_bw as f64,
        total_bits: n_values * index_bits + k * shared_bw as u64,
    })
}

/// Bits needed for `n_values` plain fixed-point values.
pub fn fixed_point_traffic(n_values: u64, bw: u32) -> u64 {
    n_values * bw as u64
}

/// Percent saved going from `baseline` bits to `actual` bits.
pub fn saving_pct(baseline: u64, actual: u64) -> f64 {
    if baseline == 0 {
        return 0.0;
    }
    (1.0 - actual as f64 / baseline as f64) * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(memory_saving(32, 64, 16, 0).unwrap().per_value_ratio, 0.1875);
        assert_eq!(memory_saving(32, 1 << 32, 16, 0).unwrap().per_value_ratio, 1.0);
    }

    #[test]
    fn total_bits_example() {
        assert_eq!(memory_saving(32, 16, 16, 1000).unwrap().total_bits, 4256);
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(memory_saving(32, 48, 16, 10).is_err());
        assert!(memory_saving(32, 0, 16, 10).is_err());
    }

    #[test]
    fn traffic() {
        assert_eq!(fixed_point_traffic(10, 8), 80);
        assert_eq!(fixed_point_traffic(0, 8), 0);
        // plain fixed point is the index payload without a table
        for bw in 1..=16u32 {
            let m = memory_saving(32, 1 << bw, 0, 777).unwrap();
            assert_eq!(m.total_bits, fixed_point_traffic(777, bw));
            assert_eq!(m.per_value_ratio * 32.0, bw as f64);
        }
    }

    #[test]
    fn saving_percent() {
        assert_eq!(saving_pct(3200, 600), 81.25);
        assert_eq!(saving_pct(0, 0), 0.0);
    }
}
