//! Three-stage orchestration: vehicles, then one plate per vehicle, then
//! characters on the enlarged plate patch.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::decode::{decode_region, nms};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Rect};
use crate::inference::{forward_output, preprocess};
use crate::layout::{recognize_plate, CharDetection, Layout, RecognitionFlags, RuleBook};
use crate::model_io::{load_weights, parse_config, Architecture, NetworkModel};

pub const DEFAULT_VEHICLE_THRESHOLD: f32 = 0.25;
pub const DEFAULT_LAYOUT_THRESHOLD: f32 = 0.75;
pub const DEFAULT_NMS_IOU: f32 = 0.25;
/// Lowest plate score that still counts as a plate (with an undefined layout).
pub const DEFAULT_PLATE_FLOOR: f32 = 0.1;
pub const TARGET_ASPECT: f32 = 2.75;
pub const ASPECT_BAND: (f32, f32) = (2.5, 3.0);
/// Fill for patch regions outside the image.
pub const FILL_GRAY: u8 = 127;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Car,
    Motorcycle,
}

impl VehicleKind {
    /// Vehicle-detector class order.
    pub fn from_class(id: usize) -> Option<Self> {
        match id {
            0 => Some(VehicleKind::Car),
            1 => Some(VehicleKind::Motorcycle),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleKind::Car => "car",
            VehicleKind::Motorcycle => "motorcycle",
        }
    }
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VehicleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Ok(VehicleKind::Car),
            "motorcycle" | "motorbike" => Ok(VehicleKind::Motorcycle),
            _ => Err(Error::Invalid(format!("unknown vehicle kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleDetection {
    /// Normalized to the full image.
    pub bbox: BoundingBox,
    pub kind: VehicleKind,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateDetection {
    /// Normalized to the vehicle patch.
    pub bbox: BoundingBox,
    /// Undefined when `score` is below the layout threshold.
    pub layout: Layout,
    /// Layout of the winning class regardless of the threshold.
    pub predicted: Layout,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateResult {
    pub vehicle: VehicleDetection,
    pub plate: PlateDetection,
    /// Plate box in image pixels.
    pub plate_rect: Rect,
    /// Region of the image the recognizer saw, in image pixels.
    pub patch_rect: Rect,
    /// Reading order; boxes normalized to `patch_rect`.
    pub characters: Vec<CharDetection>,
    pub text: String,
    pub flags: RecognitionFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VehicleOutcome {
    Recognized(PlateResult),
    NoPlate(VehicleDetection),
    Failed { vehicle: VehicleDetection, error: String },
}

impl VehicleOutcome {
    pub fn vehicle(&self) -> &VehicleDetection {
        match self {
            VehicleOutcome::Recognized(p) => &p.vehicle,
            VehicleOutcome::NoPlate(v) | VehicleOutcome::Failed { vehicle: v, .. } => v,
        }
    }
}

/// Wall-clock time of every stage invocation for one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub vehicle: Duration,
    pub plate: Vec<Duration>,
    pub recognition: Vec<Duration>,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.vehicle + self.plate.iter().sum::<Duration>() + self.recognition.iter().sum::<Duration>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub vehicles: Vec<VehicleOutcome>,
    pub timings: StageTimings,
}

impl PipelineOutput {
    pub fn plates(&self) -> impl Iterator<Item = &PlateResult> {
        self.vehicles.iter().filter_map(|v| match v {
            VehicleOutcome::Recognized(p) => Some(p),
            _ => None,
        })
    }
}

/// Stage thresholds. Character thresholds are `None` to keep the values of
/// the rule book.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub vehicle_threshold: f32,
    pub layout_threshold: f32,
    pub plate_floor: f32,
    pub nms_iou: f32,
    pub char_threshold: Option<f32>,
    pub char_threshold_european: Option<f32>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vehicle_threshold: DEFAULT_VEHICLE_THRESHOLD,
            layout_threshold: DEFAULT_LAYOUT_THRESHOLD,
            plate_floor: DEFAULT_PLATE_FLOOR,
            nms_iou: DEFAULT_NMS_IOU,
            char_threshold: None,
            char_threshold_european: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("vehicle threshold", Some(self.vehicle_threshold)),
            ("layout threshold", Some(self.layout_threshold)),
            ("plate floor", Some(self.plate_floor)),
            ("NMS IoU", Some(self.nms_iou)),
            ("character threshold", self.char_threshold),
            ("European character threshold", self.char_threshold_european),
        ];
        for (name, v) in probs {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Invalid(format!("{name} {v} is outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Applies the character-threshold overrides to a rule book.
    pub fn apply_thresholds(&self, book: &mut RuleBook) {
        if let Some(t) = self.char_threshold {
            let layouts: Vec<Layout> = book.iter().map(|r| r.layout.clone()).collect();
            for l in layouts.iter().filter(|l| **l != Layout::European) {
                book.set_threshold(l, t);
            }
        }
        if let Some(t) = self.char_threshold_european {
            book.set_threshold(&Layout::European, t);
        }
    }
}

/// The three networks with weights attached.
#[derive(Debug, Clone)]
pub struct Models {
    pub vehicle: NetworkModel,
    pub plate: NetworkModel,
    pub characters: NetworkModel,
}

impl Models {
    pub fn new(vehicle: NetworkModel, plate: NetworkModel, characters: NetworkModel) -> Result<Self> {
        let check = |m: &NetworkModel, what: &str, classes: Option<usize>| -> Result<()> {
            let r = m
                .region()
                .ok_or_else(|| Error::Shape(format!("{what} model has no region head")))?;
            if let Some(c) = classes {
                if r.classes != c {
                    return Err(Error::Shape(format!("{what} model has {} classes, expected {c}", r.classes)));
                }
            }
            if !m.has_weights() {
                return Err(Error::Weights(format!("{what} model has no weights")));
            }
            Ok(())
        };
        check(&vehicle, "vehicle", Some(2))?;
        check(&plate, "plate", None)?;
        check(&characters, "character", Some(crate::layout::GLYPH_CLASSES))?;
        Ok(Self {
            vehicle,
            plate,
            characters,
        })
    }

    /// Loads `<stem>.cfg` and `<stem>.weights` for each architecture from `dir`.
    /// A missing `.cfg` falls back to the shipped configuration.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let load = |arch: Architecture| -> Result<NetworkModel> {
            let cfg = dir.join(format!("{}.cfg", arch.file_stem()));
            let model = if cfg.exists() {
                let text = std::fs::read_to_string(&cfg).map_err(|e| Error::io(&cfg, e))?;
                parse_config(&text)?
            } else {
                arch.model()
            };
            let wpath = dir.join(format!("{}.weights", arch.file_stem()));
            let bytes = std::fs::read(&wpath).map_err(|e| Error::io(&wpath, e))?;
            load_weights(model, &bytes)
        };
        Self::new(
            load(Architecture::VehicleYolov2)?,
            load(Architecture::PlateFastYolov2)?,
            load(Architecture::CrNet)?,
        )
    }
}

fn run_head(image: &RgbImage, model: &NetworkModel, threshold: f32) -> Result<Vec<crate::decode::Detection>> {
    let region = model
        .region()
        .ok_or_else(|| Error::Shape("model has no region head".into()))?;
    let input = model.input_shape();
    let tensor = preprocess(image, input.w, input.h)?;
    let out = forward_output(model, &tensor)?;
    decode_region(&out, &region.anchors, region.classes, threshold)
}

/// Vehicles above `threshold` after per-class NMS, by descending score.
pub fn detect_vehicles(
    image: &RgbImage,
    model: &NetworkModel,
    threshold: f32,
    nms_iou: f32,
) -> Result<Vec<VehicleDetection>> {
    nms(run_head(image, model, threshold)?, nms_iou)
        .into_iter()
        .map(|d| {
            let kind = VehicleKind::from_class(d.class_id)
                .ok_or_else(|| Error::Shape(format!("vehicle class {} out of range", d.class_id)))?;
            Ok(VehicleDetection {
                bbox: d.bbox,
                kind,
                score: d.score,
            })
        })
        .collect()
}

/// The single best plate candidate in a vehicle patch.
pub fn detect_plate(
    patch: &RgbImage,
    model: &NetworkModel,
    book: &RuleBook,
    layout_threshold: f32,
    floor: f32,
) -> Result<Option<PlateDetection>> {
    let candidates = run_head(patch, model, floor)?;
    let mut best: Option<crate::decode::Detection> = None;
    for d in candidates {
        if best.as_ref().is_none_or(|b| d.score > b.score) {
            best = Some(d);
        }
    }
    let Some(best) = best else { return Ok(None) };
    let predicted = book
        .layout_of_class(best.class_id)
        .cloned()
        .ok_or_else(|| Error::Shape(format!("plate class {} has no layout rules", best.class_id)))?;
    let layout = if best.score < layout_threshold {
        Layout::Undefined
    } else {
        predicted.clone()
    };
    Ok(Some(PlateDetection {
        bbox: best.bbox,
        layout,
        predicted,
        score: best.score,
    }))
}

/// Copies `[x0, x1) x [y0, y1)` out of `image`, filling outside pixels with gray.
pub fn crop_filled(image: &RgbImage, x0: i64, y0: i64, x1: i64, y1: i64) -> RgbImage {
    let (w, h) = ((x1 - x0).max(0) as u32, (y1 - y0).max(0) as u32);
    let (iw, ih) = (image.width() as i64, image.height() as i64);
    RgbImage::from_fn(w, h, |x, y| {
        let (sx, sy) = (x0 + x as i64, y0 + y as i64);
        if (0..iw).contains(&sx) && (0..ih).contains(&sy) {
            *image.get_pixel(sx as u32, sy as u32)
        } else {
            Rgb([FILL_GRAY; 3])
        }
    })
}

/// Crops a normalized box, clamped to the image, with no margin.
/// Returns the patch and its pixel rectangle.
pub fn crop_box(image: &RgbImage, bbox: &BoundingBox) -> Result<(RgbImage, Rect)> {
    let (w, h) = (image.width(), image.height());
    let rect = bbox.to_rect(w, h).clip(w as f32, h as f32);
    let (x0, y0, x1, y1) = rect.pixel_span();
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::Invalid("box covers no pixels".into()));
    }
    let span = Rect::new(x0 as f32, y0 as f32, (x1 - x0) as f32, (y1 - y0) as f32);
    Ok((crop_filled(image, x0, y0, x1, y1), span))
}

/// Pixel region of the enlarged plate patch.
///
/// A plate whose aspect ratio lies inside `band` is used as is. Otherwise the
/// short axis is grown symmetrically about the plate center until the ratio
/// equals `target` (rounding the new extent up).
pub fn enlarged_region(plate: &Rect, target: f32, band: (f32, f32)) -> Result<(i64, i64, i64, i64)> {
    let (x0, y0, x1, y1) = plate.pixel_span();
    let (w, h) = (x1 - x0, y1 - y0);
    if w <= 0 || h <= 0 {
        return Err(Error::Invalid("degenerate plate box".into()));
    }
    let ratio = w as f32 / h as f32;
    if ratio >= band.0 && ratio <= band.1 {
        return Ok((x0, y0, x1, y1));
    }
    let (cx, cy) = ((x0 + x1) as f64 / 2.0, (y0 + y1) as f64 / 2.0);
    if ratio < band.0 {
        let nw = (h as f64 * target as f64).ceil() as i64;
        let nx0 = (cx - nw as f64 / 2.0).round() as i64;
        Ok((nx0, y0, nx0 + nw, y1))
    } else {
        let nh = (w as f64 / target as f64).ceil() as i64;
        let ny0 = (cy - nh as f64 / 2.0).round() as i64;
        Ok((x0, ny0, x1, ny0 + nh))
    }
}

/// Crops the plate with its aspect ratio brought into `band`; see [`enlarged_region`].
pub fn enlarge_patch(image: &RgbImage, plate: &Rect, target: f32, band: (f32, f32)) -> Result<(RgbImage, Rect)> {
    let (x0, y0, x1, y1) = enlarged_region(plate, target, band)?;
    let rect = Rect::new(x0 as f32, y0 as f32, (x1 - x0) as f32, (y1 - y0) as f32);
    Ok((crop_filled(image, x0, y0, x1, y1), rect))
}

fn process_vehicle(
    image: &RgbImage,
    vehicle: VehicleDetection,
    models: &Models,
    book: &RuleBook,
    config: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<VehicleOutcome> {
    let start = Instant::now();
    let (patch, vrect) = crop_box(image, &vehicle.bbox)?;
    let plate = detect_plate(&patch, &models.plate, book, config.layout_threshold, config.plate_floor);
    timings.plate.push(start.elapsed());
    let Some(plate) = plate? else {
        return Ok(VehicleOutcome::NoPlate(vehicle));
    };

    let start = Instant::now();
    let recognized = (|| {
        let plate_rect = plate
            .bbox
            .to_rect(patch.width(), patch.height())
            .translate(vrect.x, vrect.y);
        let (lp_patch, patch_rect) = enlarge_patch(image, &plate_rect, TARGET_ASPECT, ASPECT_BAND)?;
        let rules = book
            .get(&plate.layout)
            .ok_or_else(|| Error::Rules(format!("no rules for layout `{}`", plate.layout)))?;
        let rec = recognize_plate(&lp_patch, &models.characters, rules, vehicle.kind, config.nms_iou)?;
        Ok::<_, Error>((plate_rect, patch_rect, rec))
    })();
    timings.recognition.push(start.elapsed());
    let (plate_rect, patch_rect, rec) = recognized?;
    Ok(VehicleOutcome::Recognized(PlateResult {
        vehicle,
        plate,
        plate_rect,
        patch_rect,
        characters: rec.characters,
        text: rec.text,
        flags: rec.flags,
    }))
}

/// Runs the plate and recognition stages on given vehicles. A failure on one
/// vehicle is reported in its outcome and does not stop the others.
pub fn run_on_vehicles(
    image: &RgbImage,
    vehicles: &[VehicleDetection],
    models: &Models,
    book: &RuleBook,
    config: &PipelineConfig,
    timings: &mut StageTimings,
) -> Vec<VehicleOutcome> {
    vehicles
        .iter()
        .map(|v| {
            process_vehicle(image, v.clone(), models, book, config, timings).unwrap_or_else(|e| {
                VehicleOutcome::Failed {
                    vehicle: v.clone(),
                    error: e.to_string(),
                }
            })
        })
        .collect()
}

/// Full pipeline on one image.
pub fn run_pipeline(image: &RgbImage, models: &Models, book: &RuleBook, config: &PipelineConfig) -> Result<PipelineOutput> {
    let mut timings = StageTimings::default();
    let start = Instant::now();
    let vehicles = detect_vehicles(image, &models.vehicle, config.vehicle_threshold, config.nms_iou)?;
    timings.vehicle = start.elapsed();
    let vehicles = run_on_vehicles(image, &vehicles, models, book, config, &mut timings);
    Ok(PipelineOutput { vehicles, timings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: f32, h: f32) -> Rect {
        Rect::new(200.0, 200.0, w, h)
    }

    fn dims(r: (i64, i64, i64, i64)) -> (i64, i64) {
        (r.2 - r.0, r.3 - r.1)
    }

    #[test]
    fn enlarge_narrow_plate() {
        assert_eq!(dims(enlarged_region(&rect(100.0, 50.0), TARGET_ASPECT, ASPECT_BAND).unwrap()), (138, 50));
    }

    #[test]
    fn in_band_unchanged() {
        let r = enlarged_region(&rect(275.0, 100.0), TARGET_ASPECT, ASPECT_BAND).unwrap();
        assert_eq!(r, (200, 200, 475, 300));
    }

    #[test]
    fn enlarge_wide_plate() {
        let (w, h) = dims(enlarged_region(&rect(400.0, 100.0), TARGET_ASPECT, ASPECT_BAND).unwrap());
        assert_eq!((w, h), (400, 146));
    }

    #[test]
    fn enlarge_is_centered() {
        let (x0, _, x1, _) = enlarged_region(&rect(100.0, 50.0), TARGET_ASPECT, ASPECT_BAND).unwrap();
        assert_eq!(x0 + x1, 2 * 250);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(enlarged_region(&rect(0.0, 10.0), TARGET_ASPECT, ASPECT_BAND).is_err());
    }

    #[test]
    fn out_of_image_area_is_gray() {
        let img = RgbImage::from_pixel(10, 10, Rgb([0, 0, 0]));
        let (patch, r) = enlarge_patch(&img, &Rect::new(0.0, 4.0, 4.0, 2.0), TARGET_ASPECT, ASPECT_BAND).unwrap();
        assert_eq!((r.w, r.h), (6.0, 2.0));
        assert_eq!(patch.get_pixel(0, 0).0, [FILL_GRAY; 3]);
        assert_eq!(patch.get_pixel(3, 0).0, [0, 0, 0]);
    }

    #[test]
    fn vehicle_crop_clamps() {
        let img = RgbImage::new(100, 50);
        let (patch, r) = crop_box(&img, &BoundingBox::new(0.9, 0.5, 0.4, 0.5)).unwrap();
        assert_eq!((patch.width(), patch.height()), (30, 25));
        assert_eq!(r.x, 70.0);
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            nms_iou: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn threshold_overrides() {
        let mut book = crate::layout::builtin_rulesets();
        PipelineConfig {
            char_threshold: Some(0.4),
            ..Default::default()
        }
        .apply_thresholds(&mut book);
        assert_eq!(book.get(&Layout::Brazilian).unwrap().char_conf_threshold, 0.4);
        assert_eq!(book.get(&Layout::Undefined).unwrap().char_conf_threshold, 0.4);
        assert_eq!(book.get(&Layout::European).unwrap().char_conf_threshold, 0.65);
    }
}
