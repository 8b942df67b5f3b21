use super::{LayerSpec, NetworkModel};

/// Per-layer compute in billions of floating-point operations.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub per_layer: Vec<f64>,
    pub total: f64,
}

/// Counts one multiply-accumulate as two FLOPs for conv layers and one
/// comparison per window tap for max-pooling. Routing, reorg and the region
/// head are free.
pub fn compute_bflops(model: &NetworkModel) -> FlopReport {
    let per_layer: Vec<f64> = model
        .layers()
        .iter()
        .zip(model.input_shapes())
        .zip(model.shape_trace())
        .map(|((layer, input), out)| {
            let flops = match layer {
                LayerSpec::Conv(c) => {
                    2.0 * (c.size * c.size) as f64
                        * input.c as f64
                        * c.filters as f64
                        * (out.w * out.h) as f64
                }
                LayerSpec::MaxPool(p) => (out.c * p.size * p.size * out.w * out.h) as f64,
                LayerSpec::Route(_) | LayerSpec::Reorg(_) | LayerSpec::Region(_) => 0.0,
            };
            flops / 1e9
        })
        .collect();
    let total = per_layer.iter().sum();
    FlopReport { per_layer, total }
}
