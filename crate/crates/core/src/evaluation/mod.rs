//! Evaluation protocol: annotations, IoU matching, precision/recall,
//! end-to-end recognition rate, dataset splits and multi-run aggregation.

mod annotations;
mod matching;
mod metrics;
mod report;
mod split;

pub use annotations::{
    canonical_text, load_annotations, parse_annotations, write_annotations, AnnotationRecord, CharAnnotation,
    PlateAnnotation, VehicleAnnotation,
};
pub use matching::{match_detections, Counts, Matching};
pub use metrics::{aggregate_runs, recognition_rate, texts_match};
pub use report::{
    build_report, evaluate_end_to_end, evaluate_run, load_manifest, DatasetSummary, EvalOptions, EvalReport, RunCounts,
    RunMetrics, RunSpec,
};
pub use split::{split_dataset, Split, SplitProtocol};
