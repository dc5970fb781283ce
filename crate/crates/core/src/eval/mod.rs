//! Retrieval metrics (precision-recall, AP, MAP) and the DTW word-matching
//! baseline.

mod dtw;
mod metrics;

pub use dtw::{dtw_baseline_rank, dtw_distance, profile_sequence, DtwParams, DtwResult};
pub use metrics::{
    average_precision, curve_area, evaluate, mean_average_precision, parse_curve_csv, pr_curve, precision_at_recall,
    CurvePoint, EvalReport, GroundTruth, KeywordAp,
};
