//! Image loading: PNG and JPEG through the `image` crate, plus a headerless
//! raw RGB format for byte-exact fixtures.
//!
//! A raw image `plate.rgb` holds `width * height * 3` bytes in row-major RGB
//! order. Its dimensions live in the sidecar `plate.rgb.dims`, a single line
//! `<width> <height>`.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};

pub const RAW_EXTENSION: &str = "rgb";

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dims");
    PathBuf::from(s)
}

fn is_raw(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(RAW_EXTENSION))
}

/// True for file names this module can decode.
pub fn is_supported_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg" | RAW_EXTENSION)
    )
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    if is_raw(path) {
        return load_raw(path);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(image::load_from_memory(&bytes)?.to_rgb8())
}

pub fn load_raw(path: &Path) -> Result<RgbImage> {
    let dims_path = sidecar(path);
    let dims = fs::read_to_string(&dims_path).map_err(|e| Error::io(&dims_path, e))?;
    let mut it = dims.split_whitespace().map(str::parse::<u32>);
    let (w, h) = match (it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h))) if w > 0 && h > 0 => (w, h),
        _ => {
            return Err(Error::Invalid(format!(
                "{}: expected `<width> <height>`",
                dims_path.display()
            )))
        }
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    RgbImage::from_raw(w, h, bytes).ok_or_else(|| {
        Error::Invalid(format!("{}: byte count does not match {w}x{h}x3", path.display()))
    })
}

pub fn save_raw(image: &RgbImage, path: &Path) -> Result<()> {
    fs::write(path, image.as_raw()).map_err(|e| Error::io(path, e))?;
    let dims_path = sidecar(path);
    fs::write(&dims_path, format!("{} {}\n", image.width(), image.height()))
        .map_err(|e| Error::io(&dims_path, e))
}

/// Saves by extension: `.rgb` as raw, anything else through `image`.
pub fn save_image(image: &RgbImage, path: &Path) -> Result<()> {
    if is_raw(path) {
        save_raw(image, path)
    } else {
        image.save(path)?;
        Ok(())
    }
}
