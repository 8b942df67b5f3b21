use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotations::{load_annotations, AnnotationRecord};
use super::matching::{match_detections, Counts};
use super::metrics::{aggregate_runs, texts_match};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::layout::Layout;
use crate::records::{array_rect, load_results, ImageRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f32,
    /// Weight the cross-dataset average by plate count instead of giving
    /// every dataset the same weight.
    pub weighted_average: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            weighted_average: false,
        }
    }
}

/// Raw counts of one evaluation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub images: usize,
    pub vehicle: Counts,
    pub plate: Counts,
    pub plates_correct: usize,
    pub plates_total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub vehicle_precision: f64,
    pub vehicle_recall: f64,
    pub plate_precision: f64,
    pub plate_recall: f64,
    pub recognition_rate: f64,
}

impl RunMetrics {
    fn to_array(self) -> [f64; 5] {
        [
            self.vehicle_precision,
            self.vehicle_recall,
            self.plate_precision,
            self.plate_recall,
            self.recognition_rate,
        ]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            vehicle_precision: a[0],
            vehicle_recall: a[1],
            plate_precision: a[2],
            plate_recall: a[3],
            recognition_rate: a[4],
        }
    }
}

impl RunCounts {
    pub fn metrics(&self) -> RunMetrics {
        RunMetrics {
            vehicle_precision: self.vehicle.precision(),
            vehicle_recall: self.vehicle.recall(),
            plate_precision: self.plate.precision(),
            plate_recall: self.plate.recall(),
            recognition_rate: if self.plates_total == 0 {
                1.0
            } else {
                self.plates_correct as f64 / self.plates_total as f64
            },
        }
    }
}

fn basename(p: &str) -> &str {
    p.rsplit(['/', '\\']).next().unwrap_or(p)
}

/// Pairs each annotation with its result record: exact path first, then a
/// basename that is unique among the results.
fn pair_records<'a>(
    results: &'a [ImageRecord],
    annotations: &'a [AnnotationRecord],
) -> Result<Vec<(&'a AnnotationRecord, &'a ImageRecord)>> {
    let by_path: HashMap<&str, &ImageRecord> = results.iter().map(|r| (r.image.as_str(), r)).collect();
    let mut by_base: HashMap<&str, Vec<&ImageRecord>> = HashMap::new();
    for r in results {
        by_base.entry(basename(&r.image)).or_default().push(r);
    }
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for a in annotations {
        let found = by_path.get(a.image.as_str()).copied().or_else(|| match by_base.get(basename(&a.image)) {
            Some(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        });
        match found {
            Some(r) => pairs.push((a, r)),
            None => missing.push(a.image.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingKeys(missing));
    }
    Ok(pairs)
}

/// Scores one run against its annotations.
///
/// A predicted plate matches a ground-truth plate when IoU exceeds the
/// threshold and its layout is correct or undefined. A plate counts as
/// recognized when the plate whose box matches it reads the exact text.
pub fn evaluate_run(
    results: &[ImageRecord],
    annotations: &[AnnotationRecord],
    merge_1_i: bool,
    options: &EvalOptions,
) -> Result<RunCounts> {
    let mut counts = RunCounts::default();
    for (ann, res) in pair_records(results, annotations)? {
        counts.images += 1;
        let v_pred: Vec<(Rect, f32)> = res.vehicles.iter().map(|v| (array_rect(&v.rect), v.score)).collect();
        let v_gt: Vec<Rect> = ann.vehicles.iter().map(|v| v.rect).collect();
        let m = match_detections(
            &v_pred,
            &v_gt,
            |p, g| res.vehicles[p].kind == ann.vehicles[g].kind,
            options.iou_threshold,
        );
        counts.vehicle += m.counts;

        let plates: Vec<_> = res.vehicles.iter().filter_map(|v| v.plate.as_ref()).collect();
        let gt_plates: Vec<_> = ann.plates().collect();
        let p_pred: Vec<(Rect, f32)> = plates.iter().map(|p| (array_rect(&p.rect), p.score)).collect();
        let p_gt: Vec<Rect> = gt_plates.iter().map(|p| p.rect).collect();
        let m = match_detections(
            &p_pred,
            &p_gt,
            |p, g| plates[p].layout == Layout::Undefined || plates[p].layout == gt_plates[g].layout,
            options.iou_threshold,
        );
        counts.plate += m.counts;

        let boxes = match_detections(&p_pred, &p_gt, |_, _| true, options.iou_threshold);
        counts.plates_total += gt_plates.len();
        counts.plates_correct += boxes
            .pairs
            .iter()
            .filter(|&&(p, g)| texts_match(&plates[p].text, &gt_plates[g].text, merge_1_i))
            .count();
    }
    Ok(counts)
}

/// One entry of a runs manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub dataset: String,
    pub results: PathBuf,
    pub annotations: PathBuf,
    #[serde(default)]
    pub merge_1_i: bool,
}

/// Reads a TOML manifest of `[[run]]` tables. Relative paths are resolved
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<RunSpec>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Manifest {
        run: Vec<RunSpec>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    if m.run.is_empty() {
        return Err(Error::Invalid(format!("{}: no runs", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(m
        .run
        .into_iter()
        .map(|mut r| {
            r.results = base.join(&r.results);
            r.annotations = base.join(&r.annotations);
            r
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub runs: Vec<RunMetrics>,
    pub counts: Vec<RunCounts>,
    pub mean: RunMetrics,
    pub std: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub datasets: Vec<DatasetSummary>,
    pub average: RunMetrics,
    pub weighted: bool,
}

fn summarize(dataset: String, counts: Vec<RunCounts>) -> Result<DatasetSummary> {
    let runs: Vec<RunMetrics> = counts.iter().map(RunCounts::metrics).collect();
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for k in 0..5 {
        let vals: Vec<f64> = runs.iter().map(|r| r.to_array()[k]).collect();
        (mean[k], std[k]) = aggregate_runs(&vals)?;
    }
    Ok(DatasetSummary {
        dataset,
        runs,
        counts,
        mean: RunMetrics::from_array(mean),
        std: RunMetrics::from_array(std),
    })
}

/// Groups runs by dataset (in first-seen order), aggregates each dataset's
/// runs, then averages across datasets.
pub fn build_report(runs: Vec<(String, RunCounts)>, options: &EvalOptions) -> Result<EvalReport> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<RunCounts>> = HashMap::new();
    for (d, c) in runs {
        if !grouped.contains_key(&d) {
            order.push(d.clone());
        }
        grouped.entry(d).or_default().push(c);
    }
    let datasets = order
        .into_iter()
        .map(|d| {
            let c = grouped.remove(&d).expect("grouped");
            summarize(d, c)
        })
        .collect::<Result<Vec<_>>>()?;
    if datasets.is_empty() {
        return Err(Error::Invalid("no runs to report".into()));
    }
    let weights: Vec<f64> = datasets
        .iter()
        .map(|d| {
            if options.weighted_average {
                d.counts.iter().map(|c| c.plates_total).sum::<usize>() as f64 / d.counts.len() as f64
            } else {
                1.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut avg = [0.0; 5];
    for (d, w) in datasets.iter().zip(&weights) {
        for (a, m) in avg.iter_mut().zip(d.mean.to_array()) {
            *a += w * m;
        }
    }
    if total > 0.0 {
        for a in &mut avg {
            *a /= total;
        }
    }
    Ok(EvalReport {
        datasets,
        average: RunMetrics::from_array(avg),
        weighted: options.weighted_average,
    })
}

/// Evaluates every run of a manifest.
pub fn evaluate_end_to_end(specs: &[RunSpec], options: &EvalOptions) -> Result<EvalReport> {
    let mut runs = Vec::new();
    for s in specs {
        let results = load_results(&s.results)?;
        let annotations = load_annotations(&s.annotations)?;
        runs.push((s.dataset.clone(), evaluate_run(&results, &annotations, s.merge_1_i, options)?));
    }
    build_report(runs, options)
}

impl EvalReport {
    /// Human-readable table, percentages with mean ± sample std over runs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5}  {:>17}  {:>17}  {:>17}  {:>17}  {:>17}",
            "dataset", "runs", "vehicle P", "vehicle R", "plate P", "plate R", "recognition"
        );
        let cell = |m: f64, s: f64| format!("{:6.2}% ± {:5.2}%", 100.0 * m, 100.0 * s);
        for d in &self.datasets {
            let (m, s) = (d.mean.to_array(), d.std.to_array());
            let _ = writeln!(
                out,
                "{:<16} {:>5}  {}  {}  {}  {}  {}",
                d.dataset,
                d.runs.len(),
                cell(m[0], s[0]),
                cell(m[1], s[1]),
                cell(m[2], s[2]),
                cell(m[3], s[3]),
                cell(m[4], s[4])
            );
        }
        let a = self.average.to_array();
        let pct = |v: f64| format!("{:6.2}%          ", 100.0 * v);
        let _ = writeln!(
            out,
            "{:<16} {:>5}  {}  {}  {}  {}  {}",
            if self.weighted { "average (w)" } else { "average" },
            "",
            pct(a[0]),
            pct(a[1]),
            pct(a[2]),
            pct(a[3]),
            pct(a[4])
        );
        out
    }
}
