use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{Glyph, Layout};
use crate::error::{Error, Result};

const BUILTIN_RULES: &str = include_str!("../../configs/layouts.toml");

/// What a pattern position accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Letter,
    Digit,
    Either,
}

impl Slot {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'L' | 'l' => Some(Slot::Letter),
            'D' | 'd' => Some(Slot::Digit),
            '?' => Some(Slot::Either),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Slot::Letter => 'L',
            Slot::Digit => 'D',
            Slot::Either => '?',
        }
    }
}

/// How the row count of a plate is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowPolicy {
    One,
    Two,
    /// Two rows exactly when the vehicle is a motorcycle.
    ByVehicle,
    /// Two rows when at least half of the characters sit entirely below another one.
    ByGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRuleSet {
    pub layout: Layout,
    pub min_chars: usize,
    pub max_chars: usize,
    pub pattern: Option<Vec<Slot>>,
    pub rows: RowPolicy,
    pub char_conf_threshold: f32,
    pub digit_to_letter: BTreeMap<Glyph, Glyph>,
    pub letter_to_digit: BTreeMap<Glyph, Glyph>,
}

fn swap_map(pairs: &[(char, char)]) -> BTreeMap<Glyph, Glyph> {
    pairs
        .iter()
        .map(|&(a, b)| (Glyph::from_char(a).expect("alphabet"), Glyph::from_char(b).expect("alphabet")))
        .collect()
}

/// Digits read as letters in letter slots.
pub fn default_digit_to_letter() -> BTreeMap<Glyph, Glyph> {
    swap_map(&[('1', 'I'), ('2', 'Z'), ('4', 'A'), ('5', 'S'), ('6', 'G'), ('7', 'Z'), ('8', 'B')])
}

/// Letters read as digits in digit slots.
pub fn default_letter_to_digit() -> BTreeMap<Glyph, Glyph> {
    swap_map(&[
        ('A', '4'),
        ('B', '8'),
        ('D', '0'),
        ('G', '6'),
        ('I', '1'),
        ('J', '1'),
        ('Q', '0'),
        ('S', '5'),
        ('Z', '7'),
    ])
}

impl LayoutRuleSet {
    pub fn pattern_string(&self) -> Option<String> {
        self.pattern.as_ref().map(|p| p.iter().map(|s| s.as_char()).collect())
    }

    fn validate(&self) -> Result<()> {
        let name = self.layout.name();
        if self.min_chars == 0 || self.min_chars > self.max_chars {
            return Err(Error::Rules(format!(
                "{name}: need 1 <= min ({}) <= max ({})",
                self.min_chars, self.max_chars
            )));
        }
        if let Some(p) = &self.pattern {
            if p.len() != self.min_chars || p.len() != self.max_chars {
                return Err(Error::Rules(format!(
                    "{name}: pattern length {} must equal min and max",
                    p.len()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.char_conf_threshold) {
            return Err(Error::Rules(format!("{name}: threshold outside [0, 1]")));
        }
        for (d, l) in &self.digit_to_letter {
            if !d.is_digit() || !l.is_letter() {
                return Err(Error::Rules(format!("{name}: digit_to_letter entry {d} => {l}")));
            }
        }
        for (l, d) in &self.letter_to_digit {
            if !l.is_letter() || !d.is_digit() {
                return Err(Error::Rules(format!("{name}: letter_to_digit entry {l} => {d}")));
            }
        }
        Ok(())
    }
}

/// Every layout's rules, indexed by the plate detector's class order, plus
/// the fallback for low-confidence layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBook {
    pub classes: Vec<LayoutRuleSet>,
    pub undefined: LayoutRuleSet,
}

impl RuleBook {
    pub fn get(&self, layout: &Layout) -> Option<&LayoutRuleSet> {
        if *layout == Layout::Undefined {
            return Some(&self.undefined);
        }
        self.classes.iter().find(|r| r.layout == *layout)
    }

    /// Layout for a plate-detector class index.
    pub fn layout_of_class(&self, class_id: usize) -> Option<&Layout> {
        self.classes.get(class_id).map(|r| &r.layout)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LayoutRuleSet> {
        self.classes.iter().chain(std::iter::once(&self.undefined))
    }

    /// Overrides the character threshold of one layout.
    pub fn set_threshold(&mut self, layout: &Layout, threshold: f32) {
        for r in self.classes.iter_mut().chain(std::iter::once(&mut self.undefined)) {
            if r.layout == *layout {
                r.char_conf_threshold = threshold;
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Record {
            name: String,
            min: usize,
            max: usize,
            pattern: Option<String>,
            rows: RowPolicy,
            threshold: f32,
            digit_to_letter: Option<BTreeMap<String, String>>,
            letter_to_digit: Option<BTreeMap<String, String>>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            layout: Vec<Record>,
        }

        let file: File = toml::from_str(text).map_err(|e| Error::Rules(e.to_string()))?;
        let glyph = |s: &str, name: &str| -> Result<Glyph> {
            let mut chars = s.chars();
            match (chars.next().and_then(Glyph::from_char), chars.next()) {
                (Some(g), None) => Ok(g),
                _ => Err(Error::Rules(format!("{name}: `{s}` is not a single glyph"))),
            }
        };
        let convert = |m: &BTreeMap<String, String>, name: &str| -> Result<BTreeMap<Glyph, Glyph>> {
            m.iter().map(|(k, v)| Ok((glyph(k, name)?, glyph(v, name)?))).collect()
        };

        let mut classes = Vec::new();
        let mut undefined = None;
        for rec in file.layout {
            let layout: Layout = rec.name.parse()?;
            let pattern = rec
                .pattern
                .as_deref()
                .map(|p| {
                    p.chars()
                        .map(|c| {
                            Slot::from_char(c)
                                .ok_or_else(|| Error::Rules(format!("{}: bad pattern symbol `{c}`", rec.name)))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?;
            let rules = LayoutRuleSet {
                min_chars: rec.min,
                max_chars: rec.max,
                pattern,
                rows: rec.rows,
                char_conf_threshold: rec.threshold,
                digit_to_letter: match &rec.digit_to_letter {
                    Some(m) => convert(m, &rec.name)?,
                    None => default_digit_to_letter(),
                },
                letter_to_digit: match &rec.letter_to_digit {
                    Some(m) => convert(m, &rec.name)?,
                    None => default_letter_to_digit(),
                },
                layout,
            };
            rules.validate()?;
            if rules.layout == Layout::Undefined {
                if undefined.replace(rules).is_some() {
                    return Err(Error::Rules("duplicate `undefined` record".into()));
                }
            } else {
                if classes.iter().any(|r: &LayoutRuleSet| r.layout == rules.layout) {
                    return Err(Error::Rules(format!("duplicate layout `{}`", rules.layout)));
                }
                classes.push(rules);
            }
        }
        let undefined = undefined.ok_or_else(|| Error::Rules("missing `undefined` record".into()))?;
        if classes.is_empty() {
            return Err(Error::Rules("no layout classes".into()));
        }
        Ok(Self { classes, undefined })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// The shipped five-layout rules plus the undefined-layout fallback.
pub fn builtin_rulesets() -> RuleBook {
    RuleBook::parse(BUILTIN_RULES).expect("shipped layout rules are valid")
}

/// Text of the shipped rules file.
pub fn builtin_rules_text() -> &'static str {
    BUILTIN_RULES
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        let book = builtin_rulesets();
        let get = |l: Layout| book.get(&l).unwrap().clone();
        let br = get(Layout::Brazilian);
        assert_eq!((br.min_chars, br.max_chars), (7, 7));
        assert_eq!(br.pattern_string().as_deref(), Some("LLLDDDD"));
        assert_eq!(br.char_conf_threshold, 0.5);
        let eu = get(Layout::European);
        assert_eq!((eu.min_chars, eu.max_chars, eu.char_conf_threshold), (5, 8, 0.65));
        let us = get(Layout::American);
        assert_eq!((us.min_chars, us.max_chars), (4, 7));
        let cn = get(Layout::Chinese);
        assert_eq!((cn.min_chars, cn.max_chars), (6, 6));
        assert_eq!(cn.pattern_string().as_deref(), Some("L?????"));
        let tw = get(Layout::Taiwanese);
        assert_eq!((tw.min_chars, tw.max_chars), (5, 6));
        let un = get(Layout::Undefined);
        assert_eq!((un.min_chars, un.max_chars, un.char_conf_threshold), (4, 8, 0.5));
        assert_eq!(
            book.classes.iter().map(|r| r.layout.clone()).collect::<Vec<_>>(),
            vec![Layout::American, Layout::Brazilian, Layout::Chinese, Layout::European, Layout::Taiwanese]
        );
    }

    #[test]
    fn default_swaps() {
        let d2l = default_digit_to_letter();
        assert_eq!(d2l.len(), 7);
        assert_eq!(d2l[&Glyph::from_char('8').unwrap()].as_char(), 'B');
        let l2d = default_letter_to_digit();
        assert_eq!(l2d.len(), 9);
        assert_eq!(l2d[&Glyph::from_char('Q').unwrap()].as_char(), '0');
    }

    #[test]
    fn custom_layout_and_overrides() {
        let text = r#"
[[layout]]
name = "mercosur"
min = 7
max = 7
pattern = "LLLDLDD"
rows = "by-vehicle"
threshold = 0.55
digit_to_letter = { "0" = "D" }

[[layout]]
name = "undefined"
min = 4
max = 8
rows = "one"
threshold = 0.5
"#;
        let book = RuleBook::parse(text).unwrap();
        let m = book.get(&Layout::Custom("mercosur".into())).unwrap();
        assert_eq!(m.digit_to_letter.len(), 1);
        assert_eq!(m.letter_to_digit, default_letter_to_digit());
    }

    #[test]
    fn rejects_bad_pattern_length() {
        let text = "[[layout]]\nname='x'\nmin=3\nmax=3\npattern='LL'\nrows='one'\nthreshold=0.5\n[[layout]]\nname='undefined'\nmin=1\nmax=2\nrows='one'\nthreshold=0.5\n";
        assert!(RuleBook::parse(text).is_err());
    }

    #[test]
    fn requires_undefined() {
        let text = "[[layout]]\nname='x'\nmin=3\nmax=3\nrows='one'\nthreshold=0.5\n";
        assert!(RuleBook::parse(text).unwrap_err().to_string().contains("undefined"));
    }
}
