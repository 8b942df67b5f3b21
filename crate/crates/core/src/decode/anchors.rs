//! Anchor estimation by k-means over box extents with a `1 - IoU` distance,
//! boxes compared as if they shared a center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERATIONS: usize = 300;
const KMEANS_SEED: u64 = 0x5eed_a9c4;

fn centered_iou(a: (f32, f32), b: (f32, f32)) -> f64 {
    let inter = (a.0.min(b.0) as f64) * (a.1.min(b.1) as f64);
    let union = (a.0 as f64) * (a.1 as f64) + (b.0 as f64) * (b.1 as f64) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn distance(a: (f32, f32), b: (f32, f32)) -> f64 {
    1.0 - centered_iou(a, b)
}

/// Cost history and final assignment of one clustering run.
#[derive(Debug, Clone)]
pub struct KMeansTrace {
    pub anchors: Vec<(f32, f32)>,
    pub assignment: Vec<usize>,
    /// Total `1 - IoU` cost after seeding and after every iteration.
    pub costs: Vec<f64>,
    pub iterations: usize,
}

fn nearest(b: (f32, f32), centroids: &[(f32, f32)]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &c) in centroids.iter().enumerate() {
        let d = distance(b, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_plus_plus(boxes: &[(f32, f32)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f32, f32)> {
    let mut centroids = vec![boxes[rng.gen_range(0..boxes.len())]];
    let mut chosen = vec![false; boxes.len()];
    while centroids.len() < k {
        let weights: Vec<f64> = boxes
            .iter()
            .map(|&b| {
                let d = nearest(b, &centroids).1;
                d * d
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            if weights[idx] == 0.0 {
                weights.iter().rposition(|w| *w > 0.0).expect("total > 0")
            } else {
                idx
            }
        } else {
            // Every box coincides with a centroid; fall back to the first unused one.
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(boxes[pick]);
    }
    centroids
}

/// Clusters normalized `(w, h)` extents into `k` anchors.
pub fn compute_anchors(boxes: &[(f32, f32)], k: usize) -> Result<Vec<(f32, f32)>> {
    compute_anchors_traced(boxes, k).map(|t| t.anchors)
}

/// Like [`compute_anchors`] but returns the cost history as well.
///
/// A centroid only moves to its cluster mean when that does not raise the
/// cluster's cost, so the recorded costs never increase.
pub fn compute_anchors_traced(boxes: &[(f32, f32)], k: usize) -> Result<KMeansTrace> {
    if boxes.is_empty() || k == 0 {
        return Err(Error::Invalid("k-means needs at least one box and k >= 1".into()));
    }
    if k > boxes.len() {
        return Err(Error::Invalid(format!("k = {k} exceeds the {} boxes", boxes.len())));
    }
    if boxes.iter().any(|&(w, h)| !(w > 0.0 && h > 0.0)) {
        return Err(Error::Invalid("box extents must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(KMEANS_SEED);
    let mut centroids = seed_plus_plus(boxes, k, &mut rng);

    let assign = |centroids: &[(f32, f32)]| -> (Vec<usize>, f64) {
        let mut cost = 0.0;
        let a = boxes
            .iter()
            .map(|&b| {
                let (j, d) = nearest(b, centroids);
                cost += d;
                j
            })
            .collect();
        (a, cost)
    };

    let (mut assignment, cost) = assign(&centroids);
    let mut costs = vec![cost];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        for (j, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<(f32, f32)> = boxes
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == j)
                .map(|(b, _)| *b)
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let mean = (
                (members.iter().map(|m| m.0 as f64).sum::<f64>() / n) as f32,
                (members.iter().map(|m| m.1 as f64).sum::<f64>() / n) as f32,
            );
            let cost_at = |c| members.iter().map(|&m| distance(m, c)).sum::<f64>();
            if cost_at(mean) <= cost_at(*centroid) {
                *centroid = mean;
            }
        }
        let (next, cost) = assign(&centroids);
        costs.push(cost);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(KMeansTrace {
        anchors: centroids,
        assignment,
        costs,
        iterations,
    })
}

/// Converts normalized anchors to grid-cell units for a `grid_w x grid_h` head.
pub fn anchors_to_grid(anchors: &[(f32, f32)], grid_w: usize, grid_h: usize) -> Vec<(f32, f32)> {
    anchors
        .iter()
        .map(|&(w, h)| (w * grid_w as f32, h * grid_h as f32))
        .collect()
}
