//! Controlled-experiment harness: stratified repeated k-fold CV,
//! positive-class metrics and precision-maximizing hyperparameter search.

mod cv;
mod metrics;
mod report;
mod search;

pub use cv::{
    cross_validate, cross_validate_dataset, cross_validate_sliced, cross_validate_with, stratified_folds,
    stratified_folds_by, CvConfig, Learner, SlicedReport,
};
pub use metrics::{compute_metrics, Confusion, MeanStd, Metrics, MetricsReport};
pub use report::{ExperimentResult, ExperimentRow};
pub use search::{
    optimize_cv, optimize_hyperparams, read_trial_log, write_trial_log, ParamRange, ParamSpec, SearchSpace,
    Strategy, Trial, TrialScore, TuningOutcome,
};

#[derive(Debug, thiserror::Error)]
pub enum TuningError {
    #[error("only {have} positive samples for {k} folds")]
    TooFewPositives { have: usize, k: usize },
    #[error("only {have} negative samples for {k} folds")]
    TooFewNegatives { have: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("repeats must be at least 1")]
    InvalidRepeats,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("budget must be at least 1")]
    EmptyBudget,
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trial log line {line}: {message}")]
    TrialLog { line: usize, message: String },
}
