//! Cross-validation, confusion matrices, domain aggregation and the
//! preprocessing grid search.

mod confusion;
mod cv;
mod folds;
mod grid;
mod truncation;

pub use confusion::{aggregate_domains, confusion, ConfusionMatrix};
pub use cv::{run_cv, run_cv_with_models, CvOptions, CvReport, FoldResult, Prediction, Timing, DEFAULT_FOLDS};
pub use folds::{make_folds, make_stratified_folds, FoldPlan};
pub use grid::{grid_csv, grid_search, GridRow, GRID_HEADER};
pub use truncation::{truncation_comparison, RunSummary, TruncationComparison};
