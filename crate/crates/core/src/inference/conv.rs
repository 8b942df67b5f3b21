use super::BN_EPSILON;
use crate::model_io::{ConvSpec, ConvWeights};
use crate::tensor::{Shape, Tensor};

/// Unfolds `input` into a `(c * k * k) x (out_h * out_w)` column matrix.
pub(crate) fn im2col(input: &Tensor, k: usize, stride: usize, pad: usize, out_w: usize, out_h: usize) -> Vec<f32> {
    let (w, h, c) = (input.width() as isize, input.height() as isize, input.channels());
    let n = out_w * out_h;
    let mut cols = vec![0.0f32; c * k * k * n];
    for ch in 0..c {
        let plane = input.channel(ch);
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..out_h {
                    let y = (oy * stride + ky) as isize - pad as isize;
                    if y < 0 || y >= h {
                        continue;
                    }
                    let src_row = &plane[(y * w) as usize..((y + 1) * w) as usize];
                    for ox in 0..out_w {
                        let x = (ox * stride + kx) as isize - pad as isize;
                        if x >= 0 && x < w {
                            dst[oy * out_w + ox] = src_row[x as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// `c[m x n] = a[m x k] * b[k x n]`, all row-major.
fn sgemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: the slices are exactly m*k, k*n and m*n long with the row-major
    // strides passed below, so every access stays in bounds.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn convolve(input: &Tensor, spec: &ConvSpec, weights: &ConvWeights, out_shape: Shape) -> Tensor {
    let k = spec.size;
    let pad = spec.pad_px();
    let n = out_shape.w * out_shape.h;
    let depth = input.channels() * k * k;
    let mut out = Tensor::zeros(out_shape);

    let direct = k == 1 && spec.stride == 1 && pad == 0;
    let cols;
    let b: &[f32] = if direct {
        input.data()
    } else {
        cols = im2col(input, k, spec.stride, pad, out_shape.w, out_shape.h);
        &cols
    };
    sgemm(spec.filters, depth, n, &weights.kernels, b, out.data_mut());

    let data = out.data_mut();
    match &weights.batch_norm {
        Some(bn) => {
            for f in 0..spec.filters {
                let denom = (bn.variances[f] + BN_EPSILON).sqrt();
                let (scale, mean, bias) = (bn.scales[f], bn.means[f], weights.biases[f]);
                for v in &mut data[f * n..(f + 1) * n] {
                    *v = scale * (*v - mean) / denom + bias;
                }
            }
        }
        None => {
            for f in 0..spec.filters {
                let bias = weights.biases[f];
                for v in &mut data[f * n..(f + 1) * n] {
                    *v += bias;
                }
            }
        }
    }
    out
}
