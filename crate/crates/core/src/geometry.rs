//! Box types shared by every stage.
//!
//! [`BoundingBox`] is center/extent in normalized `[0, 1]` coordinates of
//! whatever raster it was predicted on. [`Rect`] is a top-left/extent box in
//! pixels. Conversions between the two need the raster dimensions.

use serde::{Deserialize, Serialize};

/// Center-format box, normalized to the raster it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl BoundingBox {
    pub fn new(cx: f32, cy: f32, w: f32, h: f32) -> Self {
        Self { cx, cy, w, h }
    }

    /// Builds a box from corner coordinates.
    pub fn from_corners(x0: f32, y0: f32, x1: f32, y1: f32) -> Self {
        Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn left(&self) -> f32 {
        self.cx - self.w / 2.0
    }

    pub fn right(&self) -> f32 {
        self.cx + self.w / 2.0
    }

    pub fn top(&self) -> f32 {
        self.cy - self.h / 2.0
    }

    pub fn bottom(&self) -> f32 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f32 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Truncates the box to the unit square. Returns `None` if nothing is left.
    pub fn clip_unit(&self) -> Option<Self> {
        let x0 = self.left().clamp(0.0, 1.0);
        let x1 = self.right().clamp(0.0, 1.0);
        let y0 = self.top().clamp(0.0, 1.0);
        let y1 = self.bottom().clamp(0.0, 1.0);
        (x1 > x0 && y1 > y0).then(|| Self::from_corners(x0, y0, x1, y1))
    }

    /// Pixel rectangle on a raster of the given size.
    pub fn to_rect(&self, width: u32, height: u32) -> Rect {
        let (w, h) = (width as f32, height as f32);
        Rect::new(self.left() * w, self.top() * h, self.w * w, self.h * h)
    }
}

/// Top-left/extent rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

impl Rect {
    pub fn new(x: f32, y: f32, w: f32, h: f32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f32 {
        self.y + self.h
    }

    pub fn center(&self) -> (f32, f32) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f32 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn to_bbox(&self, width: u32, height: u32) -> BoundingBox {
        let (w, h) = (width as f32, height as f32);
        let (cx, cy) = self.center();
        BoundingBox::new(cx / w, cy / h, self.w / w, self.h / h)
    }

    /// Offsets this rectangle by `(dx, dy)`.
    pub fn translate(&self, dx: f32, dy: f32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Intersection with `[0, width] x [0, height]`.
    pub fn clip(&self, width: f32, height: f32) -> Self {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        Self::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    /// Integer pixel span `(x0, y0, x1, y1)` obtained by rounding each edge.
    pub fn pixel_span(&self) -> (i64, i64, i64, i64) {
        (
            self.x.round() as i64,
            self.y.round() as i64,
            self.right().round() as i64,
            self.bottom().round() as i64,
        )
    }
}

/// Intersection over union of two center-format boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f32 {
    let iw = a.right().min(b.right()) - a.left().max(b.left());
    let ih = a.bottom().min(b.bottom()) - a.top().max(b.top());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let area = |r: &BoundingBox| (r.right() - r.left()) * (r.bottom() - r.top());
    let inter = iw * ih;
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over union of two pixel rectangles.
pub fn rect_iou(a: &Rect, b: &Rect) -> f32 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let area = |r: &Rect| (r.right() - r.x) * (r.bottom() - r.y);
    let inter = iw * ih;
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
