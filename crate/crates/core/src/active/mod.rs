//! Pool-based active learning.

pub mod annotation;
pub mod cv;
pub mod learner;
pub mod metrics;
pub mod pool;
pub mod strategy;

pub use annotation::{AnnotationBook, Submission};
pub use cv::{evaluate_cv, stratified_folds, CvError};
pub use learner::{
    design_matrix, run_loop, ActiveLearner, LoopConfig, LoopError, Oracle, OracleError, Phase, Query,
    ResolvedLabel, StopReason, StopRule,
};
pub use metrics::{write_curve_csv, ConfusionCounts, MetricsReport};
pub use pool::{Pool, PoolError, DEFAULT_BATCH};
pub use strategy::{entropy, margin, select_batch, uncertainty, Strategy};
