use image::{Rgb, RgbImage};

use lpr_core::records::ImageRecord;

const VEHICLE: Rgb<u8> = Rgb([0, 220, 0]);
const PLATE: Rgb<u8> = Rgb([230, 0, 0]);
const CHAR: Rgb<u8> = Rgb([0, 90, 255]);

fn outline(img: &mut RgbImage, r: &[f32; 4], color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = (r[0].round() as i64).clamp(0, w - 1);
    let y0 = (r[1].round() as i64).clamp(0, h - 1);
    let x1 = ((r[0] + r[2]).round() as i64 - 1).clamp(0, w - 1);
    let y1 = ((r[1] + r[3]).round() as i64 - 1).clamp(0, h - 1);
    for x in x0..=x1 {
        img.put_pixel(x as u32, y0 as u32, color);
        img.put_pixel(x as u32, y1 as u32, color);
    }
    for y in y0..=y1 {
        img.put_pixel(x0 as u32, y as u32, color);
        img.put_pixel(x1 as u32, y as u32, color);
    }
}

/// Copy of `image` with vehicle, plate and character boxes outlined.
pub(crate) fn draw(image: &RgbImage, record: &ImageRecord) -> RgbImage {
    let mut img = image.clone();
    if img.width() == 0 || img.height() == 0 {
        return img;
    }
    for v in &record.vehicles {
        outline(&mut img, &v.rect, VEHICLE);
        if let Some(p) = &v.plate {
            outline(&mut img, &p.rect, PLATE);
            for c in &p.characters {
                outline(&mut img, &c.rect, CHAR);
            }
        }
    }
    img
}
