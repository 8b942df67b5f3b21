use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnnotatedPlate;
use crate::geometry::Rect;
use crate::inference::resize_rgb;
use crate::pipeline::{crop_filled, FILL_GRAY};

/// Sampling ranges for [`jitter`]. Pin a range (`lo == hi`) to fix a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    /// Pixel multiplier.
    pub brightness: (f32, f32),
    /// Degrees, counter-clockwise.
    pub rotation_deg: (f32, f32),
    /// Fraction of the patch extent removed from each side; negative values add a margin.
    pub crop: (f32, f32),
}

impl Default for JitterParams {
    fn default() -> Self {
        Self {
            brightness: (0.85, 1.15),
            rotation_deg: (-5.0, 5.0),
            crop: (-0.02, 0.08),
        }
    }
}

impl JitterParams {
    pub fn identity() -> Self {
        Self {
            brightness: (1.0, 1.0),
            rotation_deg: (0.0, 0.0),
            crop: (0.0, 0.0),
        }
    }
}

/// Sampling ranges for [`rescale_margin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleParams {
    pub scale: (f32, f32),
    /// Fraction of the rescaled extent added on each side.
    pub margin: (f32, f32),
}

impl Default for RescaleParams {
    fn default() -> Self {
        Self {
            scale: (0.8, 1.2),
            margin: (0.0, 0.1),
        }
    }
}

impl RescaleParams {
    pub fn identity() -> Self {
        Self {
            scale: (1.0, 1.0),
            margin: (0.0, 0.0),
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f32, f32)) -> f32 {
    if lo >= hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Axis-aligned hull of `r` rotated by `theta` radians about `(cx, cy)`.
pub fn rotate_rect_hull(r: &Rect, theta: f32, cx: f32, cy: f32) -> Rect {
    let (s, c) = theta.sin_cos();
    let corners = [(r.x, r.y), (r.right(), r.y), (r.x, r.bottom()), (r.right(), r.bottom())];
    let pts = corners.map(|(x, y)| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + dx * c - dy * s, cy + dx * s + dy * c)
    });
    let x0 = pts.iter().map(|p| p.0).fold(f32::INFINITY, f32::min);
    let x1 = pts.iter().map(|p| p.0).fold(f32::NEG_INFINITY, f32::max);
    let y0 = pts.iter().map(|p| p.1).fold(f32::INFINITY, f32::min);
    let y1 = pts.iter().map(|p| p.1).fold(f32::NEG_INFINITY, f32::max);
    Rect::new(x0, y0, x1 - x0, y1 - y0)
}

fn rotate_raster(src: &RgbImage, theta: f32) -> RgbImage {
    let (w, h) = (src.width(), src.height());
    let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
    let (s, c) = theta.sin_cos();
    RgbImage::from_fn(w, h, |x, y| {
        // Inverse map of the pixel center.
        let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
        let sx = cx + dx * c + dy * s - 0.5;
        let sy = cy - dx * s + dy * c - 0.5;
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        let tap = |xi: f32, yi: f32, k: usize| -> f32 {
            if xi < 0.0 || yi < 0.0 || xi >= w as f32 || yi >= h as f32 {
                FILL_GRAY as f32
            } else {
                src.get_pixel(xi as u32, yi as u32)[k] as f32
            }
        };
        let mut px = [0u8; 3];
        for (k, v) in px.iter_mut().enumerate() {
            let top = tap(x0, y0, k) * (1.0 - fx) + tap(x0 + 1.0, y0, k) * fx;
            let bottom = tap(x0, y0 + 1.0, k) * (1.0 - fx) + tap(x0 + 1.0, y0 + 1.0, k) * fx;
            *v = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(px)
    })
}

/// Brightness scaling, rotation about the patch center and a per-side
/// crop or margin. Character boxes follow the transform (rotated boxes
/// become the axis-aligned hull of their corners) and are clipped to the
/// output raster.
pub fn jitter(plate: &AnnotatedPlate, params: &JitterParams, seed: u64) -> AnnotatedPlate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gain = sample(&mut rng, params.brightness);
    let angle = sample(&mut rng, params.rotation_deg);
    let sides = [0; 4].map(|_| sample(&mut rng, params.crop));

    let mut out = plate.clone();
    if gain != 1.0 {
        for p in out.raster.pixels_mut() {
            for v in p.0.iter_mut() {
                *v = (*v as f32 * gain).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    let (w, h) = (out.raster.width() as f32, out.raster.height() as f32);
    if angle != 0.0 {
        // Image rows grow downwards, so a counter-clockwise turn is a negative angle here.
        let theta = -angle.to_radians();
        out.raster = rotate_raster(&out.raster, theta);
        for c in &mut out.chars {
            c.rect = rotate_rect_hull(&c.rect, theta, w / 2.0, h / 2.0).clip(w, h);
        }
    }
    if sides.iter().any(|&f| f != 0.0) {
        let left = (sides[0] * w).round() as i64;
        let top = (sides[1] * h).round() as i64;
        let right = out.raster.width() as i64 - (sides[2] * w).round() as i64;
        let bottom = out.raster.height() as i64 - (sides[3] * h).round() as i64;
        if right > left && bottom > top {
            out.raster = crop_filled(&out.raster, left, top, right, bottom);
            let (nw, nh) = (out.raster.width() as f32, out.raster.height() as f32);
            for c in &mut out.chars {
                c.rect = c.rect.translate(-left as f32, -top as f32).clip(nw, nh);
            }
        }
    }
    out
}

/// Rescales the patch by a random factor and pads each side with a random
/// gray margin, imitating looser or tighter plate detections.
pub fn rescale_margin(plate: &AnnotatedPlate, params: &RescaleParams, seed: u64) -> AnnotatedPlate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = sample(&mut rng, params.scale);
    let margins = [0; 4].map(|_| sample(&mut rng, params.margin).max(0.0));

    let (w, h) = (plate.raster.width(), plate.raster.height());
    let nw = ((w as f32 * scale).round() as u32).max(1);
    let nh = ((h as f32 * scale).round() as u32).max(1);
    let (sx, sy) = (nw as f32 / w as f32, nh as f32 / h as f32);
    let scaled = resize_rgb(&plate.raster, nw, nh);

    let left = (margins[0] * nw as f32).round() as i64;
    let top = (margins[1] * nh as f32).round() as i64;
    let right = nw as i64 + (margins[2] * nw as f32).round() as i64;
    let bottom = nh as i64 + (margins[3] * nh as f32).round() as i64;
    let raster = if left == 0 && top == 0 && right == nw as i64 && bottom == nh as i64 {
        scaled
    } else {
        crop_filled(&scaled, -left, -top, right, bottom)
    };
    let (ow, oh) = (raster.width() as f32, raster.height() as f32);
    let chars = plate
        .chars
        .iter()
        .map(|c| {
            let r = &c.rect;
            let mut c = c.clone();
            c.rect = Rect::new(r.x * sx + left as f32, r.y * sy + top as f32, r.w * sx, r.h * sy).clip(ow, oh);
            c
        })
        .collect();
    AnnotatedPlate {
        raster,
        layout: plate.layout.clone(),
        chars,
    }
}
