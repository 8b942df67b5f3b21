//! CPU forward pass for the layer kinds the three detectors use.
//!
//! Convolutions go through an explicit im2col buffer and a single-threaded
//! SGEMM, so a given model and input always produce bit-identical outputs.

mod conv;
mod preprocess;

pub use preprocess::{preprocess, resize_bilinear, resize_rgb};

use crate::error::{Error, Result};
use crate::model_io::{Activation, LayerSpec, NetworkModel, PoolSpec};
use crate::tensor::{Shape, Tensor};

/// Batch-norm epsilon added to the rolling variance.
pub const BN_EPSILON: f32 = 1e-6;

/// Runs the network and returns every layer's output.
pub fn forward(model: &NetworkModel, input: &Tensor) -> Result<Vec<Tensor>> {
    let outs = run(model, input, true)?;
    Ok(outs.into_iter().map(|t| t.expect("kept")).collect())
}

/// Runs the network and returns only the last layer's output, dropping
/// intermediate activations as soon as no later layer needs them.
pub fn forward_output(model: &NetworkModel, input: &Tensor) -> Result<Tensor> {
    let mut outs = run(model, input, false)?;
    Ok(outs.pop().flatten().expect("last output kept"))
}

fn run(model: &NetworkModel, input: &Tensor, keep_all: bool) -> Result<Vec<Option<Tensor>>> {
    if input.shape() != model.input_shape() {
        return Err(Error::Shape(format!(
            "input is {}, model expects {}",
            input.shape(),
            model.input_shape()
        )));
    }
    if !model.has_weights() {
        return Err(Error::Weights("model has no weights loaded".into()));
    }
    let layers = model.layers();
    // Index of the last layer reading each output.
    let mut last_use: Vec<usize> = (0..layers.len()).map(|i| i + 1).collect();
    for (i, l) in layers.iter().enumerate() {
        if let LayerSpec::Route(src) = l {
            for &s in src {
                last_use[s] = last_use[s].max(i);
            }
        }
    }

    let mut outs: Vec<Option<Tensor>> = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let prev = if i == 0 {
            input
        } else {
            outs[i - 1].as_ref().expect("previous output kept")
        };
        let out = match layer {
            LayerSpec::Conv(spec) => {
                let w = model.conv_weights(i).expect("weights checked above");
                let mut t = conv::convolve(prev, spec, w, model.shape_trace()[i]);
                activate(t.data_mut(), spec.activation);
                t
            }
            LayerSpec::MaxPool(p) => maxpool(prev, p, model.shape_trace()[i]),
            LayerSpec::Route(src) => route(&outs, src, model.shape_trace()[i]),
            LayerSpec::Reorg(stride) => reorg(prev, *stride),
            LayerSpec::Region(_) => prev.clone(),
        };
        debug_assert_eq!(out.shape(), model.shape_trace()[i]);
        debug_assert!(out.all_finite(), "non-finite activation after layer {i}");
        outs.push(Some(out));
        if !keep_all {
            for (j, slot) in outs.iter_mut().enumerate().take(i) {
                if last_use[j] <= i {
                    *slot = None;
                }
            }
        }
    }
    Ok(outs)
}

fn activate(data: &mut [f32], act: Activation) {
    match act {
        Activation::Linear => {}
        Activation::Leaky => {
            for v in data {
                if *v < 0.0 {
                    *v *= 0.1;
                }
            }
        }
    }
}

fn maxpool(input: &Tensor, p: &PoolSpec, out_shape: Shape) -> Tensor {
    let offset = (p.padding / 2) as isize;
    let (in_w, in_h) = (input.width() as isize, input.height() as isize);
    let mut out = Tensor::zeros(out_shape);
    for c in 0..out_shape.c {
        let plane = input.channel(c);
        for oy in 0..out_shape.h {
            for ox in 0..out_shape.w {
                let mut best = f32::NEG_INFINITY;
                for dy in 0..p.size {
                    let y = (oy * p.stride + dy) as isize - offset;
                    if y < 0 || y >= in_h {
                        continue;
                    }
                    for dx in 0..p.size {
                        let x = (ox * p.stride + dx) as isize - offset;
                        if x < 0 || x >= in_w {
                            continue;
                        }
                        let v = plane[(y * in_w + x) as usize];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.set(c, oy, ox, best);
            }
        }
    }
    out
}

fn route(outs: &[Option<Tensor>], sources: &[usize], out_shape: Shape) -> Tensor {
    let mut data = Vec::with_capacity(out_shape.len());
    for &s in sources {
        data.extend_from_slice(outs[s].as_ref().expect("route source kept").data());
    }
    Tensor::from_vec(out_shape, data).expect("route shape validated at parse time")
}

/// Space-to-depth: output channel `(dy * stride + dx) * C + c` holds input
/// channel `c` sampled at `(x * stride + dx, y * stride + dy)`.
pub fn reorg(input: &Tensor, stride: usize) -> Tensor {
    let s = stride;
    let (w, h, c) = (input.width(), input.height(), input.channels());
    let (ow, oh) = (w / s, h / s);
    let mut out = Tensor::zeros(Shape::new(ow, oh, c * s * s));
    let data = out.data_mut();
    for dy in 0..s {
        for dx in 0..s {
            let group = (dy * s + dx) * c;
            for ch in 0..c {
                let src = input.channel(ch);
                let dst = &mut data[(group + ch) * ow * oh..(group + ch + 1) * ow * oh];
                for y in 0..oh {
                    let row = &src[(y * s + dy) * w..(y * s + dy + 1) * w];
                    for (x, d) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                        *d = row[x * s + dx];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::{load_weights, parse_config};

    fn one_by_one() -> NetworkModel {
        let m = parse_config("[net]\nwidth=2\nheight=2\nchannels=1\n[convolutional]\nfilters=1\nsize=1\nstride=1\nactivation=linear\n").unwrap();
        let mut bytes = Vec::new();
        for v in [0i32, 2, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        load_weights(m, &bytes).unwrap()
    }

    #[test]
    fn affine_one_by_one() {
        let m = one_by_one();
        let out = forward_output(&m, &Tensor::filled(Shape::new(2, 2, 1), 1.0)).unwrap();
        assert_eq!(out.data(), &[2.5; 4]);
    }

    #[test]
    fn rejects_wrong_input_and_missing_weights() {
        let m = one_by_one();
        assert!(forward(&m, &Tensor::zeros(Shape::new(3, 2, 1))).is_err());
        let bare = m.without_weights();
        assert!(forward(&bare, &Tensor::zeros(Shape::new(2, 2, 1))).is_err());
    }

    #[test]
    fn maxpool_quad() {
        let t = Tensor::from_vec(Shape::new(2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = PoolSpec {
            size: 2,
            stride: 2,
            padding: 1,
        };
        assert_eq!(maxpool(&t, &p, Shape::new(1, 1, 1)).data(), &[4.0]);
    }

    #[test]
    fn maxpool_stride_one_keeps_size() {
        let t = Tensor::from_vec(Shape::new(2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = PoolSpec {
            size: 2,
            stride: 1,
            padding: 1,
        };
        let out = maxpool(&t, &p, Shape::new(2, 2, 1));
        assert_eq!(out.data(), &[4.0, 4.0, 4.0, 4.0]);
        let t = Tensor::from_vec(Shape::new(2, 2, 1), vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(maxpool(&t, &p, Shape::new(2, 2, 1)).data(), &[4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn leaky_slope() {
        let mut v = [-1.0, 2.0];
        activate(&mut v, Activation::Leaky);
        assert_eq!(v, [-0.1, 2.0]);
    }
}
