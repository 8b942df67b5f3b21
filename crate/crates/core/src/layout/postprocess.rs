use super::{CharDetection, Glyph, LayoutRuleSet, RowPolicy, Slot};
use crate::error::{Error, Result};
use crate::pipeline::VehicleKind;

/// Characters kept after count enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct CountOutcome {
    /// Kept characters by descending score.
    pub chars: Vec<CharDetection>,
    /// The pool could not supply `min_chars` characters.
    pub short: bool,
}

fn by_score_desc(v: &mut [CharDetection]) {
    v.sort_by(|a, b| b.score.total_cmp(&a.score));
}

/// Brings the number of characters into `[min_chars, max_chars]`.
///
/// Starts from the candidates at or above the layout threshold, drops the
/// weakest when there are too many and re-admits the strongest
/// below-threshold candidates when there are too few. Never invents
/// characters: the result is always a subset of `pool`.
pub fn enforce_count(pool: &[CharDetection], rules: &LayoutRuleSet) -> CountOutcome {
    let thr = rules.char_conf_threshold;
    let (mut above, mut below): (Vec<_>, Vec<_>) = pool.iter().copied().partition(|c| c.score >= thr);
    by_score_desc(&mut above);
    by_score_desc(&mut below);
    if above.len() > rules.max_chars {
        above.truncate(rules.max_chars);
    } else if above.len() < rules.min_chars {
        let need = rules.min_chars - above.len();
        above.extend(below.into_iter().take(need));
    }
    let short = above.len() < rules.min_chars;
    CountOutcome { chars: above, short }
}

/// Result of pattern-driven digit/letter swapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapOutcome {
    pub text: String,
    /// Positions whose character violates the pattern and has no swap entry.
    pub unmapped: Vec<usize>,
}

/// Replaces digits in letter slots and letters in digit slots using the
/// layout's swap maps. Layouts without a pattern are returned unchanged.
pub fn apply_swaps(text: &str, rules: &LayoutRuleSet) -> Result<SwapOutcome> {
    let Some(pattern) = &rules.pattern else {
        return Ok(SwapOutcome {
            text: text.to_string(),
            unmapped: Vec::new(),
        });
    };
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != pattern.len() {
        return Err(Error::Invalid(format!(
            "`{text}` has {} characters, the {} pattern has {}",
            chars.len(),
            rules.layout,
            pattern.len()
        )));
    }
    let mut out = String::with_capacity(chars.len());
    let mut unmapped = Vec::new();
    for (i, (&c, slot)) in chars.iter().zip(pattern).enumerate() {
        let Some(g) = Glyph::from_char(c) else {
            unmapped.push(i);
            out.push(c);
            continue;
        };
        let swapped = match slot {
            Slot::Letter if g.is_digit() && !g.is_ambiguous() => rules.digit_to_letter.get(&g).copied(),
            Slot::Digit if g.is_letter() => rules.letter_to_digit.get(&g).copied(),
            _ => Some(g),
        };
        match swapped {
            Some(s) => out.push(s.as_char()),
            None => {
                unmapped.push(i);
                out.push(c);
            }
        }
    }
    Ok(SwapOutcome { text: out, unmapped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rows {
    One,
    Two,
}

/// Decides between one and two character rows.
pub fn detect_rows(chars: &[CharDetection], vehicle: VehicleKind, rules: &LayoutRuleSet) -> Rows {
    match rules.rows {
        RowPolicy::One => Rows::One,
        RowPolicy::Two => Rows::Two,
        RowPolicy::ByVehicle => match vehicle {
            VehicleKind::Motorcycle => Rows::Two,
            VehicleKind::Car => Rows::One,
        },
        RowPolicy::ByGeometry => {
            let below = chars
                .iter()
                .enumerate()
                .filter(|(i, c)| {
                    chars
                        .iter()
                        .enumerate()
                        .any(|(j, o)| j != *i && c.bbox.top() >= o.bbox.bottom())
                })
                .count();
            if !chars.is_empty() && 2 * below >= chars.len() {
                Rows::Two
            } else {
                Rows::One
            }
        }
    }
}

/// Splits center heights into two bands with 1-D 2-means; `true` marks the lower band.
fn lower_band(ys: &[f32]) -> Vec<bool> {
    let lo = ys.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = ys.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![false; ys.len()];
    }
    let (mut top, mut bottom) = (lo, hi);
    let mut labels: Vec<bool> = Vec::new();
    for _ in 0..100 {
        let next: Vec<bool> = ys.iter().map(|&y| (y - bottom).abs() < (y - top).abs()).collect();
        if next == labels {
            break;
        }
        labels = next;
        let mean = |want: bool| {
            let (s, n) = ys
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == want)
                .fold((0.0f64, 0usize), |(s, n), (&y, _)| (s + y as f64, n + 1));
            (n > 0).then(|| (s / n as f64) as f32)
        };
        top = mean(false).unwrap_or(top);
        bottom = mean(true).unwrap_or(bottom);
    }
    labels
}

/// Orders characters for reading and returns the text with the ordered list.
pub fn assemble_text(chars: &[CharDetection], rows: Rows) -> (String, Vec<CharDetection>) {
    let mut ordered: Vec<CharDetection> = chars.to_vec();
    match rows {
        Rows::One => ordered.sort_by(|a, b| a.bbox.cx.total_cmp(&b.bbox.cx)),
        Rows::Two => {
            let ys: Vec<f32> = chars.iter().map(|c| c.bbox.cy).collect();
            let bands = lower_band(&ys);
            let mut keyed: Vec<(bool, CharDetection)> = bands.into_iter().zip(chars.iter().copied()).collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.bbox.cx.total_cmp(&b.1.bbox.cx)));
            ordered = keyed.into_iter().map(|(_, c)| c).collect();
        }
    }
    (super::glyph_string(&ordered), ordered)
}
