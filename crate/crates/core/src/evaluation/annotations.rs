//! Plain-text annotation files.
//!
//! ```text
//! # comment
//! image frames/0001.png
//! vehicle car 120 80 300 210
//! plate brazilian 190 230 92 32 ABC1234
//! char A 193 236 11 21
//! ...
//! end
//! ```
//!
//! Boxes are `x y w h` in pixels, top-left origin. A `plate` line belongs to
//! the vehicle above it and `char` lines to the plate above them, in reading
//! order. Every record ends with `end`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::layout::{Glyph, Layout};
use crate::pipeline::VehicleKind;

#[derive(Debug, Clone, PartialEq)]
pub struct CharAnnotation {
    pub glyph: Glyph,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateAnnotation {
    pub layout: Layout,
    pub rect: Rect,
    pub text: String,
    pub chars: Vec<CharAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleAnnotation {
    pub kind: VehicleKind,
    pub rect: Rect,
    pub plate: Option<PlateAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub image: String,
    pub vehicles: Vec<VehicleAnnotation>,
}

impl AnnotationRecord {
    pub fn plates(&self) -> impl Iterator<Item = &PlateAnnotation> {
        self.vehicles.iter().filter_map(|v| v.plate.as_ref())
    }
}

/// Canonical plate text: uppercase, `O` folded into `0`.
pub fn canonical_text(text: &str) -> Option<String> {
    text.chars().map(|c| Glyph::from_char(c).map(Glyph::as_char)).collect()
}

fn parse_rect(fields: &[&str], line: usize) -> Result<Rect> {
    let nums: Vec<f32> = fields
        .iter()
        .map(|f| {
            f.parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Annotation {
                    line,
                    message: format!("`{f}` is not a number"),
                })
        })
        .collect::<Result<_>>()?;
    if nums[2] <= 0.0 || nums[3] <= 0.0 {
        return Err(Error::Annotation {
            line,
            message: "box extents must be positive".into(),
        });
    }
    Ok(Rect::new(nums[0], nums[1], nums[2], nums[3]))
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    let mut current: Option<AnnotationRecord> = None;
    let err = |line: usize, message: String| Error::Annotation { line, message };
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        let fields: Vec<&str> = rest.split_whitespace().collect();
        match keyword {
            "image" => {
                if current.is_some() {
                    return Err(err(line, "`image` before `end` of the previous record".into()));
                }
                if rest.is_empty() {
                    return Err(err(line, "`image` needs a path".into()));
                }
                current = Some(AnnotationRecord {
                    image: rest.to_string(),
                    vehicles: Vec::new(),
                });
            }
            "end" => {
                let rec = current.take().ok_or_else(|| err(line, "`end` without `image`".into()))?;
                for v in &rec.vehicles {
                    if let Some(p) = &v.plate {
                        if !p.chars.is_empty() {
                            let glyphs: String = p.chars.iter().map(|c| c.glyph.as_char()).collect();
                            if glyphs != p.text {
                                return Err(err(
                                    line,
                                    format!("plate text `{}` disagrees with its characters `{glyphs}`", p.text),
                                ));
                            }
                        }
                    }
                }
                records.push(rec);
            }
            "vehicle" | "plate" | "char" => {
                let rec = current
                    .as_mut()
                    .ok_or_else(|| err(line, format!("`{keyword}` outside a record")))?;
                match keyword {
                    "vehicle" => {
                        if fields.len() != 5 {
                            return Err(err(line, "expected `vehicle <kind> x y w h`".into()));
                        }
                        let kind = fields[0].parse().map_err(|e: Error| err(line, e.to_string()))?;
                        rec.vehicles.push(VehicleAnnotation {
                            kind,
                            rect: parse_rect(&fields[1..5], line)?,
                            plate: None,
                        });
                    }
                    "plate" => {
                        if fields.len() != 6 {
                            return Err(err(line, "expected `plate <layout> x y w h <text>`".into()));
                        }
                        let vehicle = rec
                            .vehicles
                            .last_mut()
                            .ok_or_else(|| err(line, "`plate` before any `vehicle`".into()))?;
                        if vehicle.plate.is_some() {
                            return Err(err(line, "vehicle already has a plate".into()));
                        }
                        let layout = fields[0].parse().map_err(|e: Error| err(line, e.to_string()))?;
                        let text = canonical_text(fields[5])
                            .ok_or_else(|| err(line, format!("`{}` has characters outside the alphabet", fields[5])))?;
                        vehicle.plate = Some(PlateAnnotation {
                            layout,
                            rect: parse_rect(&fields[1..5], line)?,
                            text,
                            chars: Vec::new(),
                        });
                    }
                    _ => {
                        if fields.len() != 5 {
                            return Err(err(line, "expected `char <glyph> x y w h`".into()));
                        }
                        let plate = rec
                            .vehicles
                            .last_mut()
                            .and_then(|v| v.plate.as_mut())
                            .ok_or_else(|| err(line, "`char` before any `plate`".into()))?;
                        let mut chars = fields[0].chars();
                        let glyph = match (chars.next().and_then(Glyph::from_char), chars.next()) {
                            (Some(g), None) => g,
                            _ => return Err(err(line, format!("`{}` is not a glyph", fields[0]))),
                        };
                        plate.chars.push(CharAnnotation {
                            glyph,
                            rect: parse_rect(&fields[1..5], line)?,
                        });
                    }
                }
            }
            other => return Err(err(line, format!("unknown keyword `{other}`"))),
        }
    }
    if current.is_some() {
        return Err(err(last_line, "missing `end`".into()));
    }
    Ok(records)
}

pub fn write_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    let rect = |r: &Rect| format!("{} {} {} {}", r.x, r.y, r.w, r.h);
    for rec in records {
        let _ = writeln!(out, "image {}", rec.image);
        for v in &rec.vehicles {
            let _ = writeln!(out, "vehicle {} {}", v.kind, rect(&v.rect));
            if let Some(p) = &v.plate {
                let _ = writeln!(out, "plate {} {} {}", p.layout, rect(&p.rect), p.text);
                for c in &p.chars {
                    let _ = writeln!(out, "char {} {}", c.glyph, rect(&c.rect));
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}
