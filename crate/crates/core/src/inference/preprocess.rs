use image::RgbImage;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Bilinear resize of a planar float image, corner-aligned as in Darknet's
/// `resize_image`: the first and last output samples sit on the first and
/// last input pixels.
pub fn resize_bilinear(src: &Tensor, w: usize, h: usize) -> Tensor {
    let (sw, sh, c) = (src.width(), src.height(), src.channels());
    let scale = |from: usize, to: usize| {
        if to > 1 {
            (from - 1) as f32 / (to - 1) as f32
        } else {
            0.0
        }
    };
    let (w_scale, h_scale) = (scale(sw, w), scale(sh, h));

    // Horizontal pass: sw -> w on every source row.
    let mut part = Tensor::zeros(Shape::new(w, sh, c));
    for k in 0..c {
        for r in 0..sh {
            for col in 0..w {
                let val = if col == w - 1 || sw == 1 {
                    src.get(k, r, sw - 1)
                } else {
                    let sx = col as f32 * w_scale;
                    let ix = sx as usize;
                    let dx = sx - ix as f32;
                    (1.0 - dx) * src.get(k, r, ix) + dx * src.get(k, r, ix + 1)
                };
                part.set(k, r, col, val);
            }
        }
    }

    // Vertical pass: sh -> h.
    let mut out = Tensor::zeros(Shape::new(w, h, c));
    for k in 0..c {
        for r in 0..h {
            if r == h - 1 || sh == 1 {
                for col in 0..w {
                    out.set(k, r, col, part.get(k, sh - 1, col));
                }
                continue;
            }
            let sy = r as f32 * h_scale;
            let iy = sy as usize;
            let dy = sy - iy as f32;
            for col in 0..w {
                let v = (1.0 - dy) * part.get(k, iy, col) + dy * part.get(k, iy + 1, col);
                out.set(k, r, col, v);
            }
        }
    }
    out
}

fn to_planar(image: &RgbImage) -> Tensor {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut t = Tensor::zeros(Shape::new(w, h, 3));
    for (x, y, px) in image.enumerate_pixels() {
        for k in 0..3 {
            t.set(k, y as usize, x as usize, px[k] as f32 / 255.0);
        }
    }
    t
}

/// Scales an RGB raster to `[0, 1]` and resizes it to the network input.
pub fn preprocess(image: &RgbImage, target_w: usize, target_h: usize) -> Result<Tensor> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::Invalid("cannot preprocess a zero-size image".into()));
    }
    if target_w == 0 || target_h == 0 {
        return Err(Error::Invalid("zero-size preprocessing target".into()));
    }
    let planar = to_planar(image);
    if planar.width() == target_w && planar.height() == target_h {
        return Ok(planar);
    }
    Ok(resize_bilinear(&planar, target_w, target_h))
}

/// Bilinear resize of an 8-bit RGB raster, rounding to the nearest level.
pub fn resize_rgb(image: &RgbImage, w: u32, h: u32) -> RgbImage {
    if image.width() == w && image.height() == h {
        return image.clone();
    }
    let planar = to_planar(image);
    let out = resize_bilinear(&planar, w as usize, h as usize);
    RgbImage::from_fn(w, h, |x, y| {
        let px = |k| (out.get(k, y as usize, x as usize) * 255.0).round().clamp(0.0, 255.0) as u8;
        image::Rgb([px(0), px(1), px(2)])
    })
}
