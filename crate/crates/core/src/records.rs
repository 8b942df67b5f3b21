//! Line-delimited JSON results: one [`ImageRecord`] per image.
//!
//! Boxes are `[x, y, w, h]` in image pixels. Timings are kept in separate
//! [`TimingRecord`]s so that a results file depends only on the inputs.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::layout::{Layout, RecognitionFlags};
use crate::pipeline::{PipelineOutput, StageTimings, VehicleKind, VehicleOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// At least one plate was read.
    Ok,
    /// No vehicle, no plate or no characters.
    Negative,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharRecord {
    pub glyph: char,
    pub score: f32,
    #[serde(rename = "box")]
    pub rect: [f32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateRecord {
    pub layout: Layout,
    pub predicted_layout: Layout,
    pub score: f32,
    #[serde(rename = "box")]
    pub rect: [f32; 4],
    pub text: String,
    #[serde(default)]
    pub characters: Vec<CharRecord>,
    #[serde(default)]
    pub flags: RecognitionFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub kind: VehicleKind,
    pub score: f32,
    #[serde(rename = "box")]
    pub rect: [f32; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plate: Option<PlateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image: String,
    pub status: Status,
    #[serde(default)]
    pub vehicles: Vec<VehicleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn rect_array(r: &Rect) -> [f32; 4] {
    [r.x, r.y, r.w, r.h]
}

pub fn array_rect(a: &[f32; 4]) -> Rect {
    Rect::new(a[0], a[1], a[2], a[3])
}

impl ImageRecord {
    pub fn from_output(image: &str, width: u32, height: u32, output: &PipelineOutput) -> Self {
        let vehicles: Vec<VehicleRecord> = output
            .vehicles
            .iter()
            .map(|o| {
                let v = o.vehicle();
                let mut rec = VehicleRecord {
                    kind: v.kind,
                    score: v.score,
                    rect: rect_array(&v.bbox.to_rect(width, height)),
                    plate: None,
                    error: None,
                };
                match o {
                    VehicleOutcome::Recognized(p) => {
                        let pr = &p.patch_rect;
                        rec.plate = Some(PlateRecord {
                            layout: p.plate.layout.clone(),
                            predicted_layout: p.plate.predicted.clone(),
                            score: p.plate.score,
                            rect: rect_array(&p.plate_rect),
                            text: p.text.clone(),
                            characters: p
                                .characters
                                .iter()
                                .map(|c| CharRecord {
                                    glyph: c.glyph.as_char(),
                                    score: c.score,
                                    rect: rect_array(
                                        &c.bbox.to_rect(pr.w as u32, pr.h as u32).translate(pr.x, pr.y),
                                    ),
                                })
                                .collect(),
                            flags: p.flags.clone(),
                        });
                    }
                    VehicleOutcome::NoPlate(_) => {}
                    VehicleOutcome::Failed { error, .. } => rec.error = Some(error.clone()),
                }
                rec
            })
            .collect();
        let read = vehicles
            .iter()
            .any(|v| v.plate.as_ref().is_some_and(|p| !p.text.is_empty()));
        Self {
            image: image.to_string(),
            status: if read { Status::Ok } else { Status::Negative },
            vehicles,
            error: None,
        }
    }

    pub fn failed(image: &str, error: &Error) -> Self {
        Self {
            image: image.to_string(),
            status: Status::Error,
            vehicles: Vec::new(),
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub image: String,
    pub vehicle_ms: f64,
    pub plate_ms: Vec<f64>,
    pub recognition_ms: Vec<f64>,
    pub total_ms: f64,
}

impl TimingRecord {
    pub fn new(image: &str, t: &StageTimings) -> Self {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Self {
            image: image.to_string(),
            vehicle_ms: ms(t.vehicle),
            plate_ms: t.plate.iter().copied().map(ms).collect(),
            recognition_ms: t.recognition.iter().copied().map(ms).collect(),
            total_ms: ms(t.total()),
        }
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Annotation {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<ImageRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(f))
}
