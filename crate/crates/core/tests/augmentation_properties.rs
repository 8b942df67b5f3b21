use image::{Rgb, RgbImage};
use proptest::prelude::*;

use lpr_core::augmentation::{
    jitter, negative_image, permute_characters, rescale_margin, slot_categories, AnnotatedPlate, DonorPool,
    GlyphCounts, JitterParams, RescaleParams,
};
use lpr_core::evaluation::CharAnnotation;
use lpr_core::geometry::Rect;
use lpr_core::layout::{builtin_rulesets, Glyph, Layout, ALPHABET};

/// A `w x h` plate with one box per character, evenly spaced.
fn plate(text: &str, w: u32, h: u32, layout: Layout) -> AnnotatedPlate {
    let n = text.chars().count() as u32;
    let step = w / n;
    let mut raster = RgbImage::from_pixel(w, h, Rgb([240, 240, 240]));
    let chars = text
        .chars()
        .enumerate()
        .map(|(i, c)| {
            let g = Glyph::from_char(c).unwrap();
            let x0 = i as u32 * step + 1;
            for y in 2..h - 2 {
                for x in x0..x0 + step - 2 {
                    raster.put_pixel(x, y, Rgb([7 * g.index() as u8, 30, 60]));
                }
            }
            CharAnnotation {
                glyph: g,
                rect: Rect::new(x0 as f32, 2.0, (step - 2) as f32, (h - 4) as f32),
            }
        })
        .collect();
    AnnotatedPlate { raster, layout, chars }
}

fn any_plate() -> impl Strategy<Value = AnnotatedPlate> {
    let chars: Vec<char> = ALPHABET.chars().collect();
    (prop::collection::vec(prop::sample::select(chars), 1..9), 0u32..40, 12u32..40).prop_map(|(text, extra, h)| {
        let text: String = text.into_iter().collect();
        let w = 6 * text.len() as u32 + extra;
        plate(&text, w, h, Layout::Undefined)
    })
}

fn brazilian() -> impl Strategy<Value = AnnotatedPlate> {
    let letters: Vec<char> = ALPHABET.chars().filter(|c| c.is_ascii_uppercase()).collect();
    let digits: Vec<char> = ALPHABET.chars().filter(|c| c.is_ascii_digit()).collect();
    (
        prop::collection::vec(prop::sample::select(letters), 3),
        prop::collection::vec(prop::sample::select(digits), 4),
    )
        .prop_map(|(l, d)| {
            let text: String = l.into_iter().chain(d).collect();
            plate(&text, 70, 24, Layout::Brazilian)
        })
}

fn inside(p: &AnnotatedPlate) -> bool {
    let (w, h) = (p.raster.width() as f32, p.raster.height() as f32);
    p.chars
        .iter()
        .all(|c| c.rect.x >= 0.0 && c.rect.y >= 0.0 && c.rect.right() <= w && c.rect.bottom() <= h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jitter_keeps_boxes_inside(p in any_plate(), seed in any::<u64>()) {
        let out = jitter(&p, &JitterParams::default(), seed);
        prop_assert!(inside(&out));
        prop_assert_eq!(out.chars.len(), p.chars.len());
        prop_assert_eq!(out.text(), p.text());
        prop_assert_eq!(&out, &jitter(&p, &JitterParams::default(), seed));
    }

    #[test]
    fn rescale_keeps_boxes_inside(p in any_plate(), seed in any::<u64>()) {
        let out = rescale_margin(&p, &RescaleParams::default(), seed);
        prop_assert!(inside(&out));
        prop_assert_eq!(out.text(), p.text());
        prop_assert_eq!(&out, &rescale_margin(&p, &RescaleParams::default(), seed));
    }

    #[test]
    fn negative_keeps_boxes_and_inverts(p in any_plate()) {
        let out = negative_image(&p);
        prop_assert_eq!(&out.chars, &p.chars);
        prop_assert_eq!(negative_image(&out), p);
    }

    #[test]
    fn permutation_keeps_layout_and_slot_categories(
        corpus in prop::collection::vec(brazilian(), 4..10),
        seed in any::<u64>(),
    ) {
        let book = builtin_rulesets();
        let rules = book.get(&Layout::Brazilian);
        let donors = DonorPool::from_corpus(&corpus);
        let mut counts = GlyphCounts::from_plates(&corpus);
        for p in &corpus {
            let out = permute_characters(p, &mut counts, &donors, rules, seed).unwrap();
            prop_assert_eq!(&out.layout, &p.layout);
            prop_assert_eq!(out.chars.len(), p.chars.len());
            prop_assert_eq!(slot_categories(&out, rules), slot_categories(p, rules));
            prop_assert!(out.chars.iter().all(|c| donors.has(c.glyph)));
            prop_assert!(inside(&out));
        }
    }
}

#[test]
fn rescale_inside_over_thousand_seeds() {
    let p = plate("ABC1234", 88, 30, Layout::Brazilian);
    for seed in 0..1000 {
        let out = rescale_margin(&p, &RescaleParams::default(), seed);
        assert!(inside(&out), "seed {seed}");
        assert!(out.boxes_inside());
    }
}

#[test]
fn jitter_inside_over_thousand_seeds() {
    let p = plate("AB12", 40, 14, Layout::Undefined);
    for seed in 0..1000 {
        assert!(jitter(&p, &JitterParams::default(), seed).boxes_inside(), "seed {seed}");
    }
}
