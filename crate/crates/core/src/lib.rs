//! Trust scoring for social-network accounts.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`] reads exported user and tweet records and applies the
//!    cohort selection rule and max-id deduplication.
//! 2. [`features`], [`sentiment`] and [`scoring`] turn each user into a
//!    [`FeatureVector`], including the dataset-relative influence score.
//! 3. [`preprocess`] clips and min-max normalizes the vectors.
//! 4. [`active`] runs pool-based active learning over the [`learners`],
//!    asking an oracle (a human, or [`synth::SyntheticOracle`]) for labels.
//!
//! [`experiment`] wires a synthetic cohort through the whole pipeline.

pub mod active;
pub mod experiment;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod model;
pub mod preprocess;
pub mod scoring;
pub mod sentiment;
pub mod synth;

pub use active::{
    ActiveLearner, ConfusionCounts, LoopConfig, MetricsReport, Oracle, Pool, StopRule, Strategy,
};
pub use learners::{LearnerSpec, Matrix, Model, ProbabilisticClassifier};
pub use model::{
    Feature, FeatureVector, Label, LabelSource, LabeledInstance, LearnerKind, ModelState,
    RoundRecord, TweetRecord, UserProfile,
};
pub use sentiment::Lexicon;
