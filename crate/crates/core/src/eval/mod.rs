//! Scoring rules and leave-one-station-out cross-validation.

pub mod cv;
pub mod scores;

pub use cv::{
    aggregate, losocv, losocv_fold, losocv_model, losocv_plan, uncorrected_group_experiment, FoldFailure, FoldOutput,
    LosocvConfig, ScoreReport, ScoreScale, ScoredPoint, StationScore, UncorrectedReport,
};
pub use scores::{crps_discretized, crps_gaussian, extreme_metrics, rmse, ExtremeMetric};
