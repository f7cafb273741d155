use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Frobenius norm of `a - b` over all channels, rows and columns.
///
/// Squares are accumulated in f64. Averaging over a batch is left to the
/// caller.
pub fn l2norm_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidArgument(format!(
            "cannot compare tensors of shape {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(squared_distance(a.data(), b.data()).sqrt())
}

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}
