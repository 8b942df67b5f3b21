//! Darknet model description: configuration parsing, weight-file I/O and
//! compute accounting.
//!
//! A [`NetworkModel`] is built from a `.cfg` document by [`parse_config`],
//! validated, and annotated with the output shape of every layer. Weights are
//! attached afterwards with [`load_weights`]. Once loaded the model is never
//! mutated, so it can be shared across worker threads behind an `Arc` or a
//! plain reference.

mod config;
mod flops;
mod weights;

pub use config::{parse_config, serialize_config};
pub use flops::{compute_bflops, FlopReport};
pub use weights::{load_weights, write_weights, BatchNorm, ConvWeights, ModelWeights, WeightsHeader};

use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Canonical Darknet configurations shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// YOLOv2 with a 448x288 input and a two-class (car, motorcycle) head.
    VehicleYolov2,
    /// Fast-YOLOv2 with the 1x1/3x3 tail and a five-layout head.
    PlateFastYolov2,
    /// CR-NET character detector with a 352x128 input and 35 glyph classes.
    CrNet,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::VehicleYolov2,
        Architecture::PlateFastYolov2,
        Architecture::CrNet,
    ];

    pub fn config_text(self) -> &'static str {
        match self {
            Architecture::VehicleYolov2 => include_str!("../../configs/vehicle-yolov2.cfg"),
            Architecture::PlateFastYolov2 => include_str!("../../configs/lp-fast-yolov2.cfg"),
            Architecture::CrNet => include_str!("../../configs/cr-net.cfg"),
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Architecture::VehicleYolov2 => "vehicle-yolov2",
            Architecture::PlateFastYolov2 => "lp-fast-yolov2",
            Architecture::CrNet => "cr-net",
        }
    }

    /// Parses the shipped configuration.
    pub fn model(self) -> NetworkModel {
        parse_config(self.config_text()).expect("shipped configs are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Leaky,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Leaky => "leaky",
            Activation::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub filters: usize,
    pub size: usize,
    pub stride: usize,
    pub pad: bool,
    pub batch_normalize: bool,
    pub activation: Activation,
}

impl ConvSpec {
    /// Zero-padding in pixels on each side.
    pub fn pad_px(&self) -> usize {
        if self.pad {
            self.size / 2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
    /// Total padding across both sides; the window origin is shifted by
    /// `-(padding / 2)` and out-of-range taps never win the max.
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    /// Anchor extents in grid cells.
    pub anchors: Vec<(f32, f32)>,
    pub classes: usize,
}

impl RegionSpec {
    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Channels the feeding layer must produce.
    pub fn expected_channels(&self) -> usize {
        (self.classes + 5) * self.anchors.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    MaxPool(PoolSpec),
    /// Channel concatenation of earlier layers, by absolute index.
    Route(Vec<usize>),
    /// Space-to-depth with the given stride.
    Reorg(usize),
    Region(RegionSpec),
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::MaxPool(_) => "max",
            LayerSpec::Route(_) => "route",
            LayerSpec::Reorg(_) => "reorg",
            LayerSpec::Region(_) => "detection",
        }
    }
}

/// Parsed and validated network, optionally with weights attached.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub(crate) input: Shape,
    pub(crate) layers: Vec<LayerSpec>,
    pub(crate) input_shapes: Vec<Shape>,
    pub(crate) shapes: Vec<Shape>,
    pub(crate) weights: Option<ModelWeights>,
    conv_slots: Vec<Option<usize>>,
}

impl NetworkModel {
    /// Validates a layer list and computes its shape trace.
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        let (input_shapes, shapes) = trace_shapes(input, &layers).map_err(|(i, m)| {
            Error::Shape(format!("layer {i}: {m}"))
        })?;
        let mut next = 0;
        let conv_slots = layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv(_) => {
                    next += 1;
                    Some(next - 1)
                }
                _ => None,
            })
            .collect();
        Ok(Self {
            input,
            layers,
            input_shapes,
            shapes,
            weights: None,
            conv_slots,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Output shape of every layer, in order.
    pub fn shape_trace(&self) -> &[Shape] {
        &self.shapes
    }

    /// Input shape seen by every layer (for routes, the concatenated shape).
    pub fn input_shapes(&self) -> &[Shape] {
        &self.input_shapes
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("validated models are nonempty")
    }

    pub fn weights(&self) -> Option<&ModelWeights> {
        self.weights.as_ref()
    }

    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    /// Terminal region head, if the network has one.
    pub fn region(&self) -> Option<&RegionSpec> {
        match self.layers.last() {
            Some(LayerSpec::Region(r)) => Some(r),
            _ => None,
        }
    }

    /// Weights of the conv layer at `layer` (absolute index).
    pub fn conv_weights(&self, layer: usize) -> Option<&ConvWeights> {
        let slot = self.conv_slots.get(layer).copied().flatten()?;
        self.weights.as_ref().map(|w| &w.convs[slot])
    }

    /// Number of parameters each conv layer expects, in network order.
    pub fn conv_param_layout(&self) -> Vec<(usize, usize, usize, bool)> {
        self.layers
            .iter()
            .zip(&self.input_shapes)
            .filter_map(|(l, s)| match l {
                LayerSpec::Conv(c) => Some((c.filters, s.c, c.size, c.batch_normalize)),
                _ => None,
            })
            .collect()
    }

    /// Attaches weights after checking every block's length against the layout.
    pub fn with_weights(mut self, weights: ModelWeights) -> Result<Self> {
        let layout = self.conv_param_layout();
        if layout.len() != weights.convs.len() {
            return Err(Error::Weights(format!(
                "model has {} conv layers, weights carry {}",
                layout.len(),
                weights.convs.len()
            )));
        }
        for (i, ((filters, in_c, k, bn), block)) in layout.iter().zip(&weights.convs).enumerate() {
            if !block.matches(*filters, *in_c, *k, *bn) {
                return Err(Error::Weights(format!(
                    "conv block {i} does not match {filters} filters x {in_c} channels x {k}x{k} (bn={bn})"
                )));
            }
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }
}

type TraceResult = std::result::Result<(Vec<Shape>, Vec<Shape>), (usize, String)>;

fn trace_shapes(input: Shape, layers: &[LayerSpec]) -> TraceResult {
    if input.w == 0 || input.h == 0 || input.c == 0 {
        return Err((0, format!("non-positive input dimension {input}")));
    }
    if layers.is_empty() {
        return Err((0, "network has no layers".into()));
    }
    let mut ins: Vec<Shape> = Vec::with_capacity(layers.len());
    let mut outs: Vec<Shape> = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let prev = if i == 0 { input } else { outs[i - 1] };
        let (inp, out) = match layer {
            LayerSpec::Conv(c) => {
                if c.size != 1 && c.size != 3 {
                    return Err((i, format!("conv kernel {} not in {{1, 3}}", c.size)));
                }
                if c.stride == 0 || c.filters == 0 {
                    return Err((i, "conv stride and filters must be positive".into()));
                }
                let p = 2 * c.pad_px();
                if prev.w + p < c.size || prev.h + p < c.size {
                    return Err((i, format!("kernel {} larger than padded input {prev}", c.size)));
                }
                let w = (prev.w + p - c.size) / c.stride + 1;
                let h = (prev.h + p - c.size) / c.stride + 1;
                (prev, Shape::new(w, h, c.filters))
            }
            LayerSpec::MaxPool(m) => {
                if m.size == 0 || m.stride == 0 {
                    return Err((i, "maxpool size and stride must be positive".into()));
                }
                if prev.w + m.padding < m.size || prev.h + m.padding < m.size {
                    return Err((i, format!("pool window larger than input {prev}")));
                }
                let w = (prev.w + m.padding - m.size) / m.stride + 1;
                let h = (prev.h + m.padding - m.size) / m.stride + 1;
                (prev, Shape::new(w, h, prev.c))
            }
            LayerSpec::Route(sources) => {
                if sources.is_empty() {
                    return Err((i, "route with no sources".into()));
                }
                let mut c = 0;
                let mut wh = None;
                for &s in sources {
                    if s >= i {
                        return Err((i, format!("route source {s} is not an earlier layer")));
                    }
                    if matches!(layers[s], LayerSpec::Region(_)) {
                        return Err((i, "route cannot consume a region layer".into()));
                    }
                    let sh = outs[s];
                    match wh {
                        None => wh = Some((sh.w, sh.h)),
                        Some(d) if d != (sh.w, sh.h) => {
                            return Err((i, format!("route sources disagree on spatial size: {sh}")))
                        }
                        _ => {}
                    }
                    c += sh.c;
                }
                let (w, h) = wh.expect("nonempty");
                let s = Shape::new(w, h, c);
                (s, s)
            }
            LayerSpec::Reorg(stride) => {
                let s = *stride;
                if s == 0 || prev.w % s != 0 || prev.h % s != 0 {
                    return Err((i, format!("reorg stride {s} does not divide {prev}")));
                }
                (prev, Shape::new(prev.w / s, prev.h / s, prev.c * s * s))
            }
            LayerSpec::Region(r) => {
                if i + 1 != layers.len() {
                    return Err((i, "region layer must be terminal".into()));
                }
                if r.anchors.is_empty() || r.classes == 0 {
                    return Err((i, "region needs anchors and at least one class".into()));
                }
                if i == 0 || !matches!(layers[i - 1], LayerSpec::Conv(_)) {
                    return Err((i, "region must be fed by a conv layer".into()));
                }
                if prev.c != r.expected_channels() {
                    return Err((
                        i,
                        format!(
                            "final conv has {} filters, region needs ({} + 5) x {} = {}",
                            prev.c,
                            r.classes,
                            r.num_anchors(),
                            r.expected_channels()
                        ),
                    ));
                }
                (prev, prev)
            }
        };
        if out.w == 0 || out.h == 0 || out.c == 0 {
            return Err((i, format!("non-positive output dimension {out}")));
        }
        ins.push(inp);
        outs.push(out);
    }
    Ok((ins, outs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_conv_keeps_spatial_dims() {
        let conv = ConvSpec {
            filters: 1,
            size: 1,
            stride: 1,
            pad: true,
            batch_normalize: false,
            activation: Activation::Linear,
        };
        let m = NetworkModel::new(Shape::new(4, 4, 1), vec![LayerSpec::Conv(conv)]).unwrap();
        assert_eq!(m.shape_trace(), &[Shape::new(4, 4, 1)]);
    }

    #[test]
    fn region_must_be_terminal() {
        let conv = ConvSpec {
            filters: 6,
            size: 1,
            stride: 1,
            pad: false,
            batch_normalize: false,
            activation: Activation::Linear,
        };
        let region = RegionSpec {
            anchors: vec![(1.0, 1.0)],
            classes: 1,
        };
        let err = NetworkModel::new(
            Shape::new(2, 2, 3),
            vec![
                LayerSpec::Conv(conv.clone()),
                LayerSpec::Region(region),
                LayerSpec::Conv(conv),
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("terminal"));
    }
}
