//! Hand-built miniature models and a matching rendered scene.
//!
//! The vehicle and plate networks are bias-only region heads that always
//! report one box per grid cell. The character network reads the red level
//! of seven vertical plate stripes: its class logits are
//! `alpha * (2 v x - v^2)` for the class code `v`, i.e. a nearest-code
//! classifier. Together they give a fully deterministic pipeline whose
//! expected output is known exactly.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::evaluation::{canonical_text, AnnotationRecord, CharAnnotation, PlateAnnotation, VehicleAnnotation};
use crate::geometry::Rect;
use crate::layout::{Glyph, Layout, RuleBook, GLYPH_CLASSES};
use crate::model_io::{parse_config, ConvWeights, ModelWeights, NetworkModel, WeightsHeader};
use crate::pipeline::{Models, VehicleKind};

pub const VEHICLE_W: u32 = 220;
pub const SCENE_H: u32 = 160;
pub const PLATE_CHARS: usize = 7;
const PLATE_W: u32 = 88;
const PLATE_H: u32 = 32;
const CODE_STEP: u8 = 7;
const ALPHA: f32 = 20000.0;
const BACKGROUND: Rgb<u8> = Rgb([90, 96, 104]);
const BODY: Rgb<u8> = Rgb([150, 40, 40]);

/// Red level that encodes a glyph on the synthetic plate.
pub fn glyph_code(g: Glyph) -> u8 {
    g.index() as u8 * CODE_STEP
}

fn bias_head(grid_w: usize, classes: usize, anchor: (f32, f32), biases: Vec<f32>) -> Result<NetworkModel> {
    let filters = classes + 5;
    let cfg = format!(
        "[net]\nwidth={}\nheight=4\nchannels=3\n\n[maxpool]\nsize=2\nstride=2\n\n[maxpool]\nsize=2\nstride=2\n\n\
         [convolutional]\nfilters={filters}\nsize=1\nstride=1\npad=0\nactivation=linear\n\n\
         [region]\nanchors={}, {}\nclasses={classes}\nnum=1\n",
        4 * grid_w, anchor.0, anchor.1
    );
    let model = parse_config(&cfg)?;
    model.with_weights(ModelWeights {
        header: WeightsHeader::default(),
        convs: vec![ConvWeights {
            biases,
            batch_norm: None,
            kernels: vec![0.0; filters * 3],
        }],
    })
}

/// Vehicle detector reporting one car per column of a `count x 1` grid.
pub fn vehicle_model(count: usize) -> Result<NetworkModel> {
    bias_head(count, 2, (0.8, 0.8), vec![0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 0.0])
}

/// Plate detector reporting a centered half-width, quarter-height plate of `layout_class`.
pub fn plate_model(layout_class: usize, layouts: usize) -> Result<NetworkModel> {
    let mut biases = vec![0.0, 0.0, 0.0, 0.0, 10.0];
    biases.extend((0..layouts).map(|c| if c == layout_class { 10.0 } else { 0.0 }));
    bias_head(1, layouts, (0.5, 0.25), biases)
}

/// Character network with a `PLATE_CHARS x 1` grid reading stripe codes.
pub fn character_model() -> Result<NetworkModel> {
    let filters = GLYPH_CLASSES + 5;
    let cfg = format!(
        "[net]\nwidth={}\nheight=3\nchannels=3\n\n\
         [convolutional]\nfilters={filters}\nsize=3\nstride=3\npad=0\nactivation=linear\n\n\
         [region]\nanchors=1, 1\nclasses={GLYPH_CLASSES}\nnum=1\n",
        3 * PLATE_CHARS
    );
    let model = parse_config(&cfg)?;
    let taps = 3 * 9;
    let mut kernels = vec![0.0f32; filters * taps];
    let mut biases = vec![0.0f32; filters];
    biases[4] = 10.0;
    for g in Glyph::all() {
        let v = glyph_code(g) as f32 / 255.0;
        let f = 5 + g.index();
        // Red channel, center tap.
        kernels[f * taps + 4] = 2.0 * ALPHA * v;
        biases[f] = -ALPHA * v * v;
    }
    model.with_weights(ModelWeights {
        header: WeightsHeader::default(),
        convs: vec![ConvWeights {
            biases,
            batch_norm: None,
            kernels,
        }],
    })
}

/// Renders side-by-side vehicles, each carrying a striped plate for one text.
pub fn render_scene(texts: &[&str]) -> Result<RgbImage> {
    let mut img = RgbImage::from_pixel(VEHICLE_W * texts.len() as u32, SCENE_H, BACKGROUND);
    for (i, text) in texts.iter().enumerate() {
        let glyphs: Vec<Glyph> = text
            .chars()
            .map(|c| Glyph::from_char(c).ok_or_else(|| Error::Invalid(format!("`{c}` is not a plate glyph"))))
            .collect::<Result<_>>()?;
        if glyphs.len() != PLATE_CHARS {
            return Err(Error::Invalid(format!("synthetic plates carry {PLATE_CHARS} characters")));
        }
        let ox = i as u32 * VEHICLE_W;
        for y in 16..144 {
            for x in 22..198 {
                img.put_pixel(ox + x, y, BODY);
            }
        }
        let (px, py) = (ox + (VEHICLE_W - PLATE_W) / 2, (SCENE_H - PLATE_H) / 2);
        for y in 0..PLATE_H {
            for x in 0..PLATE_W {
                let stripe = (x as usize * PLATE_CHARS) / PLATE_W as usize;
                img.put_pixel(px + x, py + y, Rgb([glyph_code(glyphs[stripe]), 200, 200]));
            }
        }
    }
    Ok(img)
}

/// Ground truth for [`render_scene`].
pub fn annotations(image: &str, texts: &[&str], layout: &Layout) -> Result<AnnotationRecord> {
    let mut vehicles = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let text = canonical_text(text).ok_or_else(|| Error::Invalid(format!("`{text}` is not a plate text")))?;
        let ox = (i as u32 * VEHICLE_W) as f32;
        let (px, py) = (ox + ((VEHICLE_W - PLATE_W) / 2) as f32, ((SCENE_H - PLATE_H) / 2) as f32);
        let n = text.chars().count();
        // Stripe j covers the columns x with floor(x * n / PLATE_W) == j.
        let edge = |j: usize| ((j * PLATE_W as usize).div_ceil(n)) as f32;
        let chars = text
            .chars()
            .enumerate()
            .map(|(j, c)| CharAnnotation {
                glyph: Glyph::from_char(c).expect("canonical"),
                rect: Rect::new(px + edge(j), py, edge(j + 1) - edge(j), PLATE_H as f32),
            })
            .collect();
        vehicles.push(VehicleAnnotation {
            kind: VehicleKind::Car,
            rect: Rect::new(ox + 22.0, 16.0, 176.0, 128.0),
            plate: Some(PlateAnnotation {
                layout: layout.clone(),
                rect: Rect::new(px, py, PLATE_W as f32, PLATE_H as f32),
                text,
                chars,
            }),
        });
    }
    Ok(AnnotationRecord {
        image: image.to_string(),
        vehicles,
    })
}

/// A scene, the models that read it, and the texts they should produce.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub image: RgbImage,
    pub models: Models,
    pub layout: Layout,
    pub expected: Vec<String>,
}

/// Builds a fixture whose plates all carry `layout`.
pub fn fixture(texts: &[&str], layout: &Layout, book: &RuleBook) -> Result<Fixture> {
    if texts.is_empty() {
        return Err(Error::Invalid("a fixture needs at least one plate".into()));
    }
    let class = book
        .classes
        .iter()
        .position(|r| r.layout == *layout)
        .ok_or_else(|| Error::Invalid(format!("layout `{layout}` is not a detector class")))?;
    Ok(Fixture {
        image: render_scene(texts)?,
        models: Models::new(vehicle_model(texts.len())?, plate_model(class, book.classes.len())?, character_model()?)?,
        layout: layout.clone(),
        expected: texts.iter().map(|t| t.to_uppercase()).collect(),
    })
}
