use serde::{Deserialize, Serialize};

use crate::geometry::{rect_iou, Rect};

/// Detection counts at one stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// `tp / (tp + fp)`, or 1 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        match self.tp + self.fp {
            0 => 1.0,
            n => self.tp as f64 / n as f64,
        }
    }

    /// `tp / (tp + fn)`, or 1 when there was nothing to find.
    pub fn recall(&self) -> f64 {
        match self.tp + self.fn_ {
            0 => 1.0,
            n => self.tp as f64 / n as f64,
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `(prediction, ground truth)` index pairs.
    pub pairs: Vec<(usize, usize)>,
    pub counts: Counts,
}

/// Greedy matching by descending prediction score (ties keep input order).
///
/// Each prediction takes the unmatched compatible ground truth with the
/// highest IoU (lowest index on ties) and is a true positive when that IoU
/// exceeds `iou_threshold`.
pub fn match_detections(
    predictions: &[(Rect, f32)],
    ground_truth: &[Rect],
    compatible: impl Fn(usize, usize) -> bool,
    iou_threshold: f32,
) -> Matching {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].1.total_cmp(&predictions[a].1));
    let mut taken = vec![false; ground_truth.len()];
    let mut pairs = Vec::new();
    for p in order {
        let mut best: Option<(usize, f32)> = None;
        for (g, gt) in ground_truth.iter().enumerate() {
            if taken[g] || !compatible(p, g) {
                continue;
            }
            let iou = rect_iou(&predictions[p].0, gt);
            if iou > iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            pairs.push((p, g));
        }
    }
    let tp = pairs.len();
    Matching {
        counts: Counts {
            tp,
            fp: predictions.len() - tp,
            fn_: ground_truth.len() - tp,
        },
        pairs,
    }
}
