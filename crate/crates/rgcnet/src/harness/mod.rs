//! Experiment orchestration: nested 3-fold cross-validation, grid search,
//! seed repetition, early stopping, learning-rate scheduling, and
//! resource accounting.

mod folds;
mod report;
mod run;
mod train;

pub use folds::{stratified_folds, stratified_train_val, subject_folds, subject_train_val};
pub use report::{
    mean_std, write_aggregate_csv, ExperimentReport, GridCell, GridSpec, MeanStd, TrialReport,
};
pub use run::{
    classifier_eval, classify_grid_search, generate_grid_search, generator_eval,
    layer_depth_comparison, nested_cv_classification, nested_cv_generation,
    write_depth_comparison_csv, ExperimentConfig, GraphSource, SelectedClassifier,
    SelectedGenerator, TaskKind,
};
pub use train::{
    peak_rss_bytes, resource_probe, run_train_loop, scheduled_lr, ResourceProbe, TrainLoopCfg,
    TrainOutcome, TrialTask,
};
