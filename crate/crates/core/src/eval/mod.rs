//! Cohort comparison: logistic regression under stratified k-fold
//! cross-validation, scored by ROC AUC.

mod auc;
mod baseline;
mod cv;
mod logistic;
mod report;

use thiserror::Error;

pub use auc::auc;
pub use baseline::{build_baseline_cohorts, target_cohort, NamedCohort};
pub use cv::{cross_validate, stratified_folds, EvalReport, TaskSpec};
pub use logistic::{loss_and_gradient, train_logistic, LogisticModel, LrConfig, Standardizer};
pub use report::{describe, format_auc, format_table, TableRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("AUC needs at least one positive and one negative")]
    SingleClass,
    #[error("{usable} usable visits is fewer than {folds} folds")]
    TooFewVisits { usable: usize, folds: usize },
    #[error("no fold had both classes in train and test")]
    NoValidFolds,
    #[error("at least two folds are required, got {0}")]
    InvalidFolds(usize),
    #[error("requested cohort size {requested} exceeds the {available} available visits")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("requested cohort size {requested} is below the target size {target}")]
    SizeBelowTarget { requested: usize, target: usize },
    #[error("features and labels disagree: {0}")]
    ShapeMismatch(String),
    #[error("non-finite feature value")]
    NonFiniteFeature,
}
