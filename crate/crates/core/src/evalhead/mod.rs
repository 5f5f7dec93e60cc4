//! Logistic-regression head, classification metrics and cross-validation.

mod cv;
mod logreg;
mod metrics;

pub use cv::{kfold_cv, stratified_folds, summarize, CvReport, MetricSummary};
pub use logreg::{fit_logreg, loss_and_grad, sigmoid, LogRegConfig, LogRegModel};
pub use metrics::{
    from_counts, metrics, rank_auc, DegenerateFlags, MetricsReport, DEFAULT_THRESHOLD,
};
