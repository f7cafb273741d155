//! Float-32 reference kernels.
//!
//! Accumulation runs in f32 in a fixed loop order so results are bitwise
//! reproducible. Shapes are validated by the caller.

use crate::tensor::Tensor;

pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    out_shape: Vec<usize>,
) -> Tensor {
    let (cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let k = kernel.shape()[2];
    let (cout, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
    let x = input.data();
    let wt = kernel.data();
    let mut out = vec![0.0f32; cout * oh * ow];
    for oc in 0..cout {
        let b = bias.data()[oc];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b;
                for ic in 0..cin {
                    let wbase = (oc * cin + ic) * k * k;
                    let xbase = ic * h * w;
                    for ky in 0..k {
                        // zero padding: out-of-range cells contribute nothing
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += wt[wbase + ky * k + kx]
                                * x[xbase + iy as usize * w + ix as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::new(out_shape, out).expect("conv output shape")
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Max pooling; padded cells never win.
pub fn max_pool2d(
    input: &Tensor,
    window: usize,
    stride: usize,
    padding: usize,
    out_shape: Vec<usize>,
) -> Tensor {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let x = input.data();
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..window {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..window {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        best = best.max(x[(ch * h + iy as usize) * w + ix as usize]);
                    }
                }
                out[(ch * oh + oy) * ow + ox] = best;
            }
        }
    }
    Tensor::new(out_shape, out).expect("pool output shape")
}

/// Inference-mode batch norm with stored statistics, per channel (axis 0).
pub fn batch_norm(
    input: &Tensor,
    scale: &Tensor,
    shift: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    epsilon: f32,
) -> Tensor {
    let c = input.shape()[0];
    let per_channel = input.len() / c;
    let mut out = input.clone();
    for (ch, chunk) in out.data_mut().chunks_mut(per_channel).enumerate() {
        let inv = scale.data()[ch] / (var.data()[ch] + epsilon).sqrt();
        let (m, s) = (mean.data()[ch], shift.data()[ch]);
        for v in chunk {
            *v = (*v - m) * inv + s;
        }
    }
    out
}

/// `weight` is `[out, in]`; the input is flattened.
pub fn fully_connected(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
    let x = input.data();
    let out = (0..out_f)
        .map(|o| {
            let row = &weight.data()[o * in_f..(o + 1) * in_f];
            row.iter()
                .zip(x)
                .fold(bias.data()[o], |acc, (w, v)| acc + w * v)
        })
        .collect();
    Tensor::vector(out)
}

/// Softmax over all elements.
pub fn softmax(input: &Tensor) -> Tensor {
    let max = input
        .data()
        .iter()
        .fold(f32::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = input
        .data()
        .iter()
        .map(|&v| ((v - max) as f64).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(
        input.shape().to_vec(),
        exps.iter().map(|e| (e / sum) as f32).collect(),
    )
    .expect("softmax shape")
}
