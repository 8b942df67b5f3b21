//! Region-head decoding, non-maximum suppression and anchor clustering.

mod anchors;
mod nms;

pub use anchors::{compute_anchors, compute_anchors_traced, anchors_to_grid, KMeansTrace, KMEANS_MAX_ITERATIONS};
pub use nms::nms;

pub use crate::geometry::{iou, BoundingBox};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One decoded candidate from a region head.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub objectness: f32,
    pub class_probs: Vec<f32>,
    pub class_id: usize,
    /// `objectness * class_probs[class_id]`.
    pub score: f32,
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Decodes a region feature map laid out as `A` blocks of `C + 5` channels
/// (`tx, ty, tw, th, to, class logits...`), one block per anchor.
///
/// Candidates are produced in (row, column, anchor) order and kept when
/// their score reaches `conf_threshold`. Boxes are truncated to the image.
pub fn decode_region(
    feature_map: &Tensor,
    anchors: &[(f32, f32)],
    classes: usize,
    conf_threshold: f32,
) -> Result<Vec<Detection>> {
    let per_anchor = classes + 5;
    if anchors.is_empty() || feature_map.channels() != per_anchor * anchors.len() {
        return Err(Error::Shape(format!(
            "region map has {} channels, expected ({classes} + 5) x {} anchors",
            feature_map.channels(),
            anchors.len()
        )));
    }
    let (gw, gh) = (feature_map.width(), feature_map.height());
    let plane = gw * gh;
    let data = feature_map.data();
    let mut logits = vec![0.0f32; classes];
    let mut out = Vec::new();
    for row in 0..gh {
        for col in 0..gw {
            let cell = row * gw + col;
            for (a, &(pw, ph)) in anchors.iter().enumerate() {
                let base = a * per_anchor * plane + cell;
                let at = |entry: usize| data[base + entry * plane];
                let objectness = sigmoid(at(4));
                // score <= objectness, so anything below the threshold here is final.
                if objectness < conf_threshold {
                    continue;
                }
                for (k, l) in logits.iter_mut().enumerate() {
                    *l = at(5 + k);
                }
                let class_probs = softmax(&logits);
                let (class_id, best) = argmax(&class_probs);
                let score = objectness * best;
                if score < conf_threshold {
                    continue;
                }
                let raw = BoundingBox::new(
                    (sigmoid(at(0)) + col as f32) / gw as f32,
                    (sigmoid(at(1)) + row as f32) / gh as f32,
                    pw * at(2).exp() / gw as f32,
                    ph * at(3).exp() / gh as f32,
                );
                let Some(bbox) = raw.clip_unit() else { continue };
                out.push(Detection {
                    bbox,
                    objectness,
                    class_probs,
                    class_id,
                    score,
                });
            }
        }
    }
    Ok(out)
}

fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut probs: Vec<f32> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f32 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// First index of the maximum.
fn argmax(values: &[f32]) -> (usize, f32) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}
