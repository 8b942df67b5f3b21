//! Corpus augmentation for plate patches: class-balancing character
//! permutation, negatives, photometric/geometric jitter and rescaling with
//! a margin. Every operation is a pure function of its input and seed.

mod geometric;
mod permute;

pub use geometric::{jitter, rescale_margin, rotate_rect_hull, JitterParams, RescaleParams};
pub use permute::{
    category_ratio, permute_characters, permute_corpus, slot_categories, DonorPool, GlyphCounts, SlotCategory,
};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::evaluation::{AnnotationRecord, CharAnnotation, PlateAnnotation, VehicleAnnotation};
use crate::geometry::Rect;
use crate::layout::Layout;
use crate::pipeline::{crop_filled, VehicleKind};

/// A plate patch with per-character boxes in patch pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPlate {
    pub raster: RgbImage,
    pub layout: Layout,
    pub chars: Vec<CharAnnotation>,
}

impl AnnotatedPlate {
    pub fn text(&self) -> String {
        self.chars.iter().map(|c| c.glyph.as_char()).collect()
    }

    /// Crops an annotated plate out of a scene; character boxes move to patch coordinates.
    pub fn from_scene(image: &RgbImage, plate: &PlateAnnotation) -> Result<Self> {
        let (x0, y0, x1, y1) = plate.rect.pixel_span();
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Invalid("plate box covers no pixels".into()));
        }
        let raster = crop_filled(image, x0, y0, x1, y1);
        let (w, h) = (raster.width() as f32, raster.height() as f32);
        let chars = plate
            .chars
            .iter()
            .map(|c| CharAnnotation {
                glyph: c.glyph,
                rect: c.rect.translate(-x0 as f32, -y0 as f32).clip(w, h),
            })
            .collect();
        Ok(Self {
            raster,
            layout: plate.layout.clone(),
            chars,
        })
    }

    /// Annotation record describing this patch as a full-frame plate.
    pub fn to_record(&self, image: &str) -> AnnotationRecord {
        let full = Rect::new(0.0, 0.0, self.raster.width() as f32, self.raster.height() as f32);
        AnnotationRecord {
            image: image.to_string(),
            vehicles: vec![VehicleAnnotation {
                kind: VehicleKind::Car,
                rect: full,
                plate: Some(PlateAnnotation {
                    layout: self.layout.clone(),
                    rect: full,
                    text: self.text(),
                    chars: self.chars.clone(),
                }),
            }],
        }
    }

    pub fn boxes_inside(&self) -> bool {
        let (w, h) = (self.raster.width() as f32, self.raster.height() as f32);
        self.chars
            .iter()
            .all(|c| c.rect.x >= 0.0 && c.rect.y >= 0.0 && c.rect.right() <= w && c.rect.bottom() <= h)
    }
}

/// Inverts every channel; annotations are untouched.
pub fn negative_image(plate: &AnnotatedPlate) -> AnnotatedPlate {
    let mut out = plate.clone();
    for p in out.raster.pixels_mut() {
        *p = Rgb([255 - p[0], 255 - p[1], 255 - p[2]]);
    }
    out
}
