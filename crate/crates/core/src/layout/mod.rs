//! Layout-aware post-processing of character detections.
//!
//! The plate detector predicts a layout class; each layout carries a
//! [`LayoutRuleSet`] that bounds the character count, optionally fixes
//! letter/digit slots, and says how to tell one-row from two-row plates.

mod postprocess;
mod recognize;
mod rules;

pub use postprocess::{apply_swaps, assemble_text, detect_rows, enforce_count, CountOutcome, Rows, SwapOutcome};
pub use recognize::{recognize_candidates, recognize_plate, Recognition, RecognitionFlags};
pub use rules::{
    builtin_rules_text, builtin_rulesets, default_digit_to_letter, default_letter_to_digit, LayoutRuleSet, RowPolicy, RuleBook, Slot,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Recognizer alphabet. `O` is folded into `0`.
pub const ALPHABET: &str = "0123456789ABCDEFGHIJKLMNPQRSTUVWXYZ";
pub const GLYPH_CLASSES: usize = 35;
pub const DIGIT_CLASSES: usize = 10;

/// One of the 35 recognizer classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Glyph(u8);

impl Glyph {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < GLYPH_CLASSES).then_some(Glyph(index as u8))
    }

    /// Maps a character to its class; lowercase is accepted and `O` reads as `0`.
    pub fn from_char(c: char) -> Option<Self> {
        let c = match c.to_ascii_uppercase() {
            'O' => '0',
            other => other,
        };
        ALPHABET.find(c).map(|i| Glyph(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        ALPHABET.as_bytes()[self.0 as usize] as char
    }

    pub fn is_digit(self) -> bool {
        (self.0 as usize) < DIGIT_CLASSES
    }

    pub fn is_letter(self) -> bool {
        !self.is_digit()
    }

    /// `0` doubles as the letter `O`, so it fits either kind of slot.
    pub fn is_ambiguous(self) -> bool {
        self.0 == 0
    }

    pub fn all() -> impl Iterator<Item = Glyph> {
        (0..GLYPH_CLASSES as u8).map(Glyph)
    }
}

impl fmt::Display for Glyph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Plate layout class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    American,
    Brazilian,
    Chinese,
    European,
    Taiwanese,
    Undefined,
    /// A layout added through a rules file.
    Custom(String),
}

impl Layout {
    pub fn name(&self) -> &str {
        match self {
            Layout::American => "american",
            Layout::Brazilian => "brazilian",
            Layout::Chinese => "chinese",
            Layout::European => "european",
            Layout::Taiwanese => "taiwanese",
            Layout::Undefined => "undefined",
            Layout::Custom(name) => name,
        }
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "american" => Layout::American,
            "brazilian" => Layout::Brazilian,
            "chinese" => Layout::Chinese,
            "european" => Layout::European,
            "taiwanese" => Layout::Taiwanese,
            "undefined" => Layout::Undefined,
            "" => return Err(Error::Invalid("empty layout name".into())),
            _ if lower.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => Layout::Custom(lower),
            _ => return Err(Error::Invalid(format!("bad layout name `{s}`"))),
        })
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Layout {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Layout {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A recognized character in plate-patch coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharDetection {
    pub bbox: BoundingBox,
    pub glyph: Glyph,
    pub score: f32,
}

/// Concatenates glyphs in slice order.
pub fn glyph_string(chars: &[CharDetection]) -> String {
    chars.iter().map(|c| c.glyph.as_char()).collect()
}
