//! Layout-independent license plate recognition on CPU.
//!
//! The engine runs three Darknet-format YOLO networks in sequence: a vehicle
//! detector over the full frame, a plate detector that also classifies the
//! plate layout over each vehicle crop, and a character detector (CR-NET)
//! over each enlarged plate crop. Layout-specific heuristics then turn raw
//! character detections into the final plate string.
//!
//! Module map:
//!
//! - [`model_io`]: Darknet `.cfg` parsing, `.weights` I/O and BFLOP accounting.
//! - [`inference`]: CPU forward pass and image preprocessing.
//! - [`decode`]: region-layer decoding, IoU, NMS and k-means anchors.
//! - [`pipeline`]: the three-stage orchestration and plate-patch enlargement.
//! - [`layout`]: per-layout rules, swaps, row detection and text assembly.
//! - [`augmentation`]: character permutation, negatives, jitter, rescaling.
//! - [`evaluation`]: annotations, matching, metrics, splits and run aggregation.
//! - [`bench`]: per-stage timing and the vehicles-count sweep.

pub mod augmentation;
pub mod bench;
pub mod decode;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod imageio;
pub mod inference;
pub mod layout;
pub mod model_io;
pub mod pipeline;
pub mod records;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
