use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnnotatedPlate;
use crate::error::{Error, Result};
use crate::layout::{Glyph, LayoutRuleSet, RuleBook, Slot, GLYPH_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotCategory {
    Letter,
    Digit,
    Either,
}

impl SlotCategory {
    fn admits(self, g: Glyph) -> bool {
        match self {
            SlotCategory::Letter => g.is_letter(),
            SlotCategory::Digit => g.is_digit(),
            SlotCategory::Either => true,
        }
    }
}

/// Occurrences of each glyph in a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphCounts(pub [usize; GLYPH_CLASSES]);

impl Default for GlyphCounts {
    fn default() -> Self {
        Self([0; GLYPH_CLASSES])
    }
}

impl GlyphCounts {
    pub fn from_plates<'a>(plates: impl IntoIterator<Item = &'a AnnotatedPlate>) -> Self {
        let mut c = Self::default();
        for p in plates {
            c.add_plate(p);
        }
        c
    }

    pub fn add_plate(&mut self, p: &AnnotatedPlate) {
        for ch in &p.chars {
            self.0[ch.glyph.index()] += 1;
        }
    }

    pub fn get(&self, g: Glyph) -> usize {
        self.0[g.index()]
    }
}

/// `max / min` count over the letters (`Letter`) or digits (`Digit`).
pub fn category_ratio(counts: &GlyphCounts, category: SlotCategory) -> f64 {
    let vals: Vec<usize> = Glyph::all()
        .filter(|g| match category {
            SlotCategory::Either => true,
            c => c.admits(*g),
        })
        .map(|g| counts.get(g))
        .collect();
    let max = *vals.iter().max().expect("nonempty category");
    let min = *vals.iter().min().expect("nonempty category");
    if min == 0 {
        f64::INFINITY
    } else {
        max as f64 / min as f64
    }
}

/// Character patches cut from a corpus, by glyph.
#[derive(Debug, Clone, Default)]
pub struct DonorPool {
    patches: Vec<Vec<RgbImage>>,
}

impl DonorPool {
    pub fn from_corpus(corpus: &[AnnotatedPlate]) -> Self {
        let mut patches = vec![Vec::new(); GLYPH_CLASSES];
        for p in corpus {
            for c in &p.chars {
                let (x0, y0, x1, y1) = c.rect.clip(p.raster.width() as f32, p.raster.height() as f32).pixel_span();
                if x1 > x0 && y1 > y0 {
                    let patch = imageops::crop_imm(&p.raster, x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32);
                    patches[c.glyph.index()].push(patch.to_image());
                }
            }
        }
        Self { patches }
    }

    pub fn has(&self, g: Glyph) -> bool {
        !self.patches[g.index()].is_empty()
    }
}

/// Letter/digit category of every character slot.
///
/// A layout pattern fixes `L` and `D` positions. Other positions keep the
/// category of the glyph they hold, with `0` fitting either.
pub fn slot_categories(plate: &AnnotatedPlate, rules: Option<&LayoutRuleSet>) -> Vec<SlotCategory> {
    let pattern = rules
        .and_then(|r| r.pattern.as_ref())
        .filter(|p| p.len() == plate.chars.len());
    plate
        .chars
        .iter()
        .enumerate()
        .map(|(i, c)| match pattern.map(|p| p[i]) {
            Some(Slot::Letter) => SlotCategory::Letter,
            Some(Slot::Digit) => SlotCategory::Digit,
            _ if c.glyph.is_ambiguous() => SlotCategory::Either,
            _ if c.glyph.is_digit() => SlotCategory::Digit,
            _ => SlotCategory::Letter,
        })
        .collect()
}

fn choose(counts: &GlyphCounts, donors: &DonorPool, category: SlotCategory, rng: &mut ChaCha8Rng) -> Result<Glyph> {
    let candidates: Vec<Glyph> = Glyph::all().filter(|g| category.admits(*g) && donors.has(*g)).collect();
    let min = candidates
        .iter()
        .map(|g| counts.get(*g))
        .min()
        .ok_or_else(|| Error::Invalid(format!("no donor glyphs for a {category:?} slot")))?;
    let rarest: Vec<Glyph> = candidates.into_iter().filter(|g| counts.get(*g) == min).collect();
    Ok(*rarest.choose(rng).expect("nonempty"))
}

/// Refills every character slot with a donor patch of the rarest admissible
/// glyph and records the new glyphs in `counts`.
pub fn permute_characters(
    plate: &AnnotatedPlate,
    counts: &mut GlyphCounts,
    donors: &DonorPool,
    rules: Option<&LayoutRuleSet>,
    seed: u64,
) -> Result<AnnotatedPlate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = plate.clone();
    let (w, h) = (plate.raster.width() as f32, plate.raster.height() as f32);
    for (slot, category) in out.chars.iter_mut().zip(slot_categories(plate, rules)) {
        let (x0, y0, x1, y1) = slot.rect.clip(w, h).pixel_span();
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Invalid("character box covers no pixels".into()));
        }
        let glyph = choose(counts, donors, category, &mut rng)?;
        let pool = &donors.patches[glyph.index()];
        let donor = &pool[rng.gen_range(0..pool.len())];
        let resized = imageops::resize(donor, (x1 - x0) as u32, (y1 - y0) as u32, FilterType::Nearest);
        imageops::replace(&mut out.raster, &resized, x0, y0);
        slot.glyph = glyph;
        counts.0[glyph.index()] += 1;
    }
    Ok(out)
}

/// Generates `copies` permuted variants of every plate, balancing glyph
/// frequencies over the original corpus plus everything generated so far.
pub fn permute_corpus(corpus: &[AnnotatedPlate], book: &RuleBook, copies: usize, seed: u64) -> Result<Vec<AnnotatedPlate>> {
    let mut counts = GlyphCounts::from_plates(corpus);
    let donors = DonorPool::from_corpus(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(corpus.len() * copies);
    for _ in 0..copies {
        for p in corpus {
            let next = permute_characters(p, &mut counts, &donors, book.get(&p.layout), rng.gen())?;
            out.push(next);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CharAnnotation;
    use crate::geometry::Rect;
    use crate::layout::{builtin_rulesets, Layout};
    use image::Rgb;

    fn plate(text: &str) -> AnnotatedPlate {
        let mut raster = RgbImage::from_pixel(10 * text.len() as u32, 20, Rgb([255; 3]));
        let chars = text
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let g = Glyph::from_char(c).unwrap();
                for y in 2..18 {
                    for x in 0..8 {
                        raster.put_pixel(10 * i as u32 + 1 + x, y, Rgb([g.index() as u8; 3]));
                    }
                }
                CharAnnotation {
                    glyph: g,
                    rect: Rect::new(10.0 * i as f32 + 1.0, 2.0, 8.0, 16.0),
                }
            })
            .collect();
        AnnotatedPlate {
            raster,
            layout: Layout::Brazilian,
            chars,
        }
    }

    #[test]
    fn keeps_letter_digit_arrangement() {
        let corpus = vec![plate("ABC1234"), plate("QXZ9870")];
        let book = builtin_rulesets();
        for p in permute_corpus(&corpus, &book, 5, 7).unwrap() {
            let cats: Vec<bool> = p.chars.iter().map(|c| c.glyph.is_letter()).collect();
            assert_eq!(cats, vec![true, true, true, false, false, false, false]);
            assert_eq!(p.layout, Layout::Brazilian);
        }
    }

    #[test]
    fn pasted_pixels_follow_glyph() {
        let corpus = vec![plate("ABC1234"), plate("QXZ9870")];
        let mut counts = GlyphCounts::from_plates(&corpus);
        let donors = DonorPool::from_corpus(&corpus);
        let out = permute_characters(&corpus[0], &mut counts, &donors, None, 3).unwrap();
        for c in &out.chars {
            let px = out.raster.get_pixel(c.rect.x as u32 + 2, c.rect.y as u32 + 2);
            assert_eq!(px.0[0] as usize, c.glyph.index());
        }
    }

    #[test]
    fn rare_glyph_chosen_first() {
        let corpus = vec![plate("AAA1111"), plate("AAQ1112")];
        let mut counts = GlyphCounts::from_plates(&corpus);
        let donors = DonorPool::from_corpus(&corpus);
        let out = permute_characters(&corpus[0], &mut counts, &donors, None, 0).unwrap();
        assert_eq!(out.chars[0].glyph.as_char(), 'Q');
        assert_eq!(out.chars[3].glyph.as_char(), '2');
    }

    #[test]
    fn missing_category_is_error() {
        let corpus = vec![plate("ABC")];
        let mut counts = GlyphCounts::from_plates(&corpus);
        let donors = DonorPool::from_corpus(&corpus);
        let digits = plate("123");
        assert!(permute_characters(&digits, &mut counts, &donors, None, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let corpus = vec![plate("ABC1234"), plate("QXZ9870")];
        let book = builtin_rulesets();
        assert_eq!(permute_corpus(&corpus, &book, 3, 11).unwrap(), permute_corpus(&corpus, &book, 3, 11).unwrap());
    }
}
