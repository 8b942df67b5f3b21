use std::collections::HashMap;

use super::Detection;
use crate::geometry::iou;

/// Greedy per-class non-maximum suppression.
///
/// Candidates are visited by descending score; equal scores keep their input
/// order. A candidate survives when its IoU with every survivor of the same
/// class is below `iou_threshold`. Survivors are returned in visiting order.
pub fn nms(detections: Vec<Detection>, iou_threshold: f32) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

    let mut kept_by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    for i in order {
        let d = &detections[i];
        let same = kept_by_class.entry(d.class_id).or_default();
        if same.iter().all(|&k| iou(&detections[k].bbox, &d.bbox) < iou_threshold) {
            same.push(i);
            kept.push(i);
        }
    }

    let mut slots: Vec<Option<Detection>> = detections.into_iter().map(Some).collect();
    kept.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}
