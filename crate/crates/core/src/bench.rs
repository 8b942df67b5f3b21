//! Stage timing harness.
//!
//! Each stage is timed on its own over warm repetitions. The vehicles-count
//! sweep then reports both the additive prediction
//! `t_vehicle + n * (t_plate + t_recognition)` and the measured time of a
//! full pass that runs the plate and recognition stages `n` times.

use std::fmt::Write as _;
use std::time::Instant;

use image::RgbImage;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::aggregate_runs;
use crate::geometry::{BoundingBox, Rect};
use crate::layout::{recognize_plate, Layout, RuleBook};
use crate::pipeline::{
    crop_box, detect_plate, detect_vehicles, enlarge_patch, Models, PipelineConfig, VehicleDetection, VehicleKind,
    ASPECT_BAND, TARGET_ASPECT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageStats {
    pub mean_ms: f64,
    /// Sample standard deviation over repetitions.
    pub std_ms: f64,
    pub samples: usize,
}

impl StageStats {
    pub fn from_samples(ms: &[f64]) -> Result<Self> {
        let (mean_ms, std_ms) = aggregate_runs(ms)?;
        Ok(Self {
            mean_ms,
            std_ms,
            samples: ms.len(),
        })
    }

    pub fn fps(&self) -> f64 {
        if self.mean_ms > 0.0 {
            1e3 / self.mean_ms
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub vehicles: usize,
    pub predicted_ms: f64,
    pub measured: StageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub vehicle: StageStats,
    pub plate: StageStats,
    pub recognition: StageStats,
    pub sweep: Vec<SweepRow>,
    /// No vehicle was detected and the whole frame stood in for one.
    pub vehicle_fallback: bool,
    /// No plate was detected and a centered box stood in for one.
    pub plate_fallback: bool,
}

impl BenchReport {
    pub fn end_to_end_ms(&self) -> f64 {
        self.vehicle.mean_ms + self.plate.mean_ms + self.recognition.mean_ms
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:<14} {:>20} {:>10}", "stage", "network", "time (ms)", "FPS");
        for (stage, net, s) in [
            ("vehicle", "YOLOv2", &self.vehicle),
            ("plate", "Fast-YOLOv2", &self.plate),
            ("recognition", "CR-NET", &self.recognition),
        ] {
            let _ = writeln!(
                out,
                "{:<12} {:<14} {:>11.4} ± {:<7.4} {:>10.1}",
                stage,
                net,
                s.mean_ms,
                s.std_ms,
                s.fps()
            );
        }
        let e2e = self.end_to_end_ms();
        let _ = writeln!(out, "{:<12} {:<14} {:>20.4} {:>10.1}", "end-to-end", "", e2e, 1e3 / e2e);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>8} {:>14} {:>22} {:>10}", "vehicles", "predicted (ms)", "measured (ms)", "FPS");
        for r in &self.sweep {
            let _ = writeln!(
                out,
                "{:>8} {:>14.4} {:>12.4} ± {:<7.4} {:>10.1}",
                r.vehicles,
                r.predicted_ms,
                r.measured.mean_ms,
                r.measured.std_ms,
                1e3 / r.predicted_ms
            );
        }
        if self.vehicle_fallback {
            let _ = writeln!(out, "note: no vehicle detected, the full frame was used as the vehicle");
        }
        if self.plate_fallback {
            let _ = writeln!(out, "note: no plate detected, a centered box was used as the plate");
        }
        out
    }
}

struct Stages<'a> {
    image: &'a RgbImage,
    models: &'a Models,
    book: &'a RuleBook,
    config: &'a PipelineConfig,
}

impl Stages<'_> {
    fn vehicles(&self) -> Result<Vec<VehicleDetection>> {
        detect_vehicles(self.image, &self.models.vehicle, self.config.vehicle_threshold, self.config.nms_iou)
    }

    /// Plate box in image pixels and its layout; `None` when nothing was found.
    fn plate(&self, vehicle: &VehicleDetection) -> Result<(Option<(Rect, Layout)>, Rect)> {
        let (patch, vrect) = crop_box(self.image, &vehicle.bbox)?;
        let found = detect_plate(
            &patch,
            &self.models.plate,
            self.book,
            self.config.layout_threshold,
            self.config.plate_floor,
        )?;
        Ok((
            found.map(|p| (p.bbox.to_rect(patch.width(), patch.height()).translate(vrect.x, vrect.y), p.layout)),
            vrect,
        ))
    }

    fn recognize(&self, plate: &Rect, layout: &Layout, kind: VehicleKind) -> Result<String> {
        let (patch, _) = enlarge_patch(self.image, plate, TARGET_ASPECT, ASPECT_BAND)?;
        let rules = self
            .book
            .get(layout)
            .ok_or_else(|| Error::Rules(format!("no rules for layout `{layout}`")))?;
        Ok(recognize_plate(&patch, &self.models.characters, rules, kind, self.config.nms_iou)?.text)
    }
}

fn fallback_plate(vrect: &Rect) -> Rect {
    let (cx, cy) = vrect.center();
    let w = (vrect.w / 2.0).max(1.0);
    let h = (w / TARGET_ASPECT).max(1.0);
    Rect::new(cx - w / 2.0, cy - h / 2.0, w, h)
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Times every stage `reps` times after `warmup` untimed passes.
pub fn run_bench(
    image: &RgbImage,
    models: &Models,
    book: &RuleBook,
    config: &PipelineConfig,
    sweep: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Invalid("need at least one timed repetition".into()));
    }
    let s = Stages {
        image,
        models,
        book,
        config,
    };
    let detected = s.vehicles()?;
    let vehicle_fallback = detected.is_empty();
    let vehicle = detected.into_iter().next().unwrap_or(VehicleDetection {
        bbox: BoundingBox::new(0.5, 0.5, 1.0, 1.0),
        kind: VehicleKind::Car,
        score: 1.0,
    });
    let (found, vrect) = s.plate(&vehicle)?;
    let plate_fallback = found.is_none();
    let (plate_rect, layout) = found.unwrap_or((fallback_plate(&vrect), Layout::Undefined));

    let one_vehicle = |n: usize| -> Result<()> {
        s.vehicles()?;
        for _ in 0..n {
            s.plate(&vehicle)?;
            s.recognize(&plate_rect, &layout, vehicle.kind)?;
        }
        Ok(())
    };
    for _ in 0..warmup {
        one_vehicle(1)?;
    }

    let (mut tv, mut tp, mut tr) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..reps {
        let t = Instant::now();
        s.vehicles()?;
        tv.push(ms_since(t));
        let t = Instant::now();
        s.plate(&vehicle)?;
        tp.push(ms_since(t));
        let t = Instant::now();
        s.recognize(&plate_rect, &layout, vehicle.kind)?;
        tr.push(ms_since(t));
    }
    let (vehicle_s, plate_s, rec_s) = (
        StageStats::from_samples(&tv)?,
        StageStats::from_samples(&tp)?,
        StageStats::from_samples(&tr)?,
    );

    let mut rows = Vec::new();
    for &n in sweep {
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = Instant::now();
            one_vehicle(n)?;
            samples.push(ms_since(t));
        }
        rows.push(SweepRow {
            vehicles: n,
            predicted_ms: vehicle_s.mean_ms + n as f64 * (plate_s.mean_ms + rec_s.mean_ms),
            measured: StageStats::from_samples(&samples)?,
        });
    }
    Ok(BenchReport {
        vehicle: vehicle_s,
        plate: plate_s,
        recognition: rec_s,
        sweep: rows,
        vehicle_fallback,
        plate_fallback,
    })
}
