use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{apply_swaps, assemble_text, detect_rows, enforce_count, CharDetection, Glyph, LayoutRuleSet, Rows};
use crate::decode::{decode_region, nms, Detection};
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::inference::{forward_output, preprocess};
use crate::model_io::NetworkModel;
use crate::pipeline::VehicleKind;

/// Things worth knowing about a recognition besides its text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognitionFlags {
    /// No character candidates at all.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negative: bool,
    /// Fewer candidates than the layout's minimum.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short: bool,
    /// Text length differs from the layout pattern, so no swaps were applied.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pattern_mismatch: bool,
    /// Positions that break the pattern and have no swap entry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmapped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub text: String,
    /// Surviving characters in reading order, boxes in patch coordinates.
    pub characters: Vec<CharDetection>,
    pub rows: Rows,
    pub flags: RecognitionFlags,
}

/// Drops candidates overlapping a higher-scored candidate of any class.
fn suppress_across_classes(mut dets: Vec<Detection>, iou_threshold: f32) -> Vec<Detection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) < iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Turns decoded character candidates into a plate string.
pub fn recognize_candidates(
    candidates: Vec<Detection>,
    rules: &LayoutRuleSet,
    vehicle: VehicleKind,
    nms_iou: f32,
) -> Result<Recognition> {
    let pool: Vec<CharDetection> = suppress_across_classes(nms(candidates, nms_iou), nms_iou)
        .into_iter()
        .map(|d| {
            let glyph = Glyph::from_index(d.class_id).ok_or_else(|| {
                Error::Shape(format!("character class {} outside the alphabet", d.class_id))
            })?;
            Ok(CharDetection {
                bbox: d.bbox,
                glyph,
                score: d.score,
            })
        })
        .collect::<Result<_>>()?;
    if pool.is_empty() {
        return Ok(Recognition {
            text: String::new(),
            characters: Vec::new(),
            rows: Rows::One,
            flags: RecognitionFlags {
                negative: true,
                short: true,
                ..Default::default()
            },
        });
    }
    let counted = enforce_count(&pool, rules);
    let rows = detect_rows(&counted.chars, vehicle, rules);
    let (raw, characters) = assemble_text(&counted.chars, rows);
    let mut flags = RecognitionFlags {
        short: counted.short,
        ..Default::default()
    };
    let text = match &rules.pattern {
        Some(p) if p.len() != characters.len() => {
            flags.pattern_mismatch = true;
            raw
        }
        _ => {
            let swapped = apply_swaps(&raw, rules)?;
            flags.unmapped = swapped.unmapped;
            swapped.text
        }
    };
    let characters = characters
        .into_iter()
        .zip(text.chars())
        .map(|(c, t)| CharDetection {
            glyph: Glyph::from_char(t).unwrap_or(c.glyph),
            ..c
        })
        .collect();
    Ok(Recognition {
        text,
        characters,
        rows,
        flags,
    })
}

/// Runs the character network on a plate patch and post-processes its output.
///
/// Every candidate is decoded (threshold 0) so that count enforcement can
/// fall back on below-threshold characters.
pub fn recognize_plate(
    patch: &RgbImage,
    crnet: &NetworkModel,
    rules: &LayoutRuleSet,
    vehicle: VehicleKind,
    nms_iou: f32,
) -> Result<Recognition> {
    let region = crnet
        .region()
        .ok_or_else(|| Error::Shape("character model has no region head".into()))?;
    let input = crnet.input_shape();
    let tensor = preprocess(patch, input.w, input.h)?;
    let out = forward_output(crnet, &tensor)?;
    let candidates = decode_region(&out, &region.anchors, region.classes, 0.0)?;
    recognize_candidates(candidates, rules, vehicle, nms_iou)
}
