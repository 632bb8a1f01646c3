//! Desk-scale experiment on a synthetic cohort.
//!
//! A cohort is generated, scored and normalized; a stratified seed set is
//! drawn and the rest becomes the pool. Two measurements are offered: the
//! learning curve of one learner and strategy against a synthetic oracle,
//! and a cross-validated comparison of all learners on the seed set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{design_matrix, evaluate_cv, run_loop, CvError, LoopConfig, LoopError, Pool, StopReason, StopRule, Strategy};
use crate::learners::{Activation, LearnerSpec, Matrix, MlpParams};
use crate::model::{Feature, Label, LearnerKind, RoundRecord};
use crate::preprocess::{feature_mask, MaskMode};
use crate::sentiment::Lexicon;
use crate::synth::{self, CohortConfig, SynthError, SyntheticOracle};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error(transparent)]
    Loop(#[from] LoopError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub cohort: CohortConfig,
    pub seed_trusted: usize,
    pub seed_untrusted: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub stop: StopRule,
    pub features: Vec<Feature>,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            cohort: CohortConfig::default(),
            seed_trusted: 582,
            seed_untrusted: 418,
            batch_size: 100,
            folds: 10,
            // ten rounds, no gain-based stop, so the whole curve is visible
            stop: StopRule {
                max_rounds: 10,
                min_gain: -1.0,
                patience: 2,
            },
            features: feature_mask(&MaskMode::PaperDefault).expect("built-in mask"),
        }
    }
}

/// A prepared run: the pool and an oracle that knows every label.
pub struct DeskRun {
    pub pool: Pool,
    pub oracle: SyntheticOracle,
}

pub fn prepare(cfg: &DeskConfig, seed: u64, lexicon: &Lexicon) -> Result<DeskRun, ExperimentError> {
    let cohort = synth::generate(&CohortConfig {
        seed,
        ..cfg.cohort.clone()
    });
    let vectors = synth::feature_vectors(&cohort, lexicon)?;
    let pool = synth::seeded_pool(vectors, &cohort.truth, cfg.seed_trusted, cfg.seed_untrusted, cfg.batch_size, seed)?;
    Ok(DeskRun {
        pool,
        oracle: SyntheticOracle::new(cohort.truth),
    })
}

fn seed_set(pool: &Pool, features: &[Feature]) -> (Matrix, Vec<Label>) {
    let refs: Vec<_> = pool.labeled().iter().map(|l| &l.features).collect();
    let y = pool.labeled().iter().map(|l| l.label).collect();
    (design_matrix(&refs, features), y)
}

/// The loop configuration used for `seed`: cross-validation and selection
/// are both seeded with it.
pub fn loop_config(cfg: &DeskConfig, seed: u64, spec: LearnerSpec, strategy: Strategy) -> LoopConfig {
    let mut loop_cfg = LoopConfig::new(spec, strategy, cfg.features.clone());
    loop_cfg.folds = cfg.folds;
    loop_cfg.cv_seed = seed;
    loop_cfg.selection_seed = seed;
    loop_cfg.stop = cfg.stop;
    loop_cfg
}

/// Runs the active loop against the synthetic oracle.
pub fn learning_curve(
    cfg: &DeskConfig,
    seed: u64,
    spec: LearnerSpec,
    strategy: Strategy,
    lexicon: &Lexicon,
) -> Result<(Vec<RoundRecord>, StopReason), ExperimentError> {
    let DeskRun { pool, mut oracle } = prepare(cfg, seed, lexicon)?;
    let (_, curve, reason) = run_loop(pool, loop_config(cfg, seed, spec, strategy), &mut oracle)?;
    Ok((curve, reason))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerScore {
    pub name: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingRow {
    pub seed: u64,
    pub forest: f64,
    pub svm: f64,
    pub mlp: Vec<LearnerScore>,
}

impl OrderingRow {
    pub fn worst_mlp(&self) -> f64 {
        self.mlp.iter().map(|s| s.accuracy).fold(f64::INFINITY, f64::min)
    }

    /// Forest at least as good as the SVM, which is at least as good as the
    /// weakest perceptron.
    pub fn holds(&self) -> bool {
        self.forest >= self.svm && self.svm >= self.worst_mlp()
    }
}

/// Cross-validated accuracy of every learner on the same seed set.
pub fn learner_ordering(cfg: &DeskConfig, seed: u64, lexicon: &Lexicon) -> Result<OrderingRow, ExperimentError> {
    let run = prepare(cfg, seed, lexicon)?;
    let (x, y) = seed_set(&run.pool, &cfg.features);
    let score = |spec: LearnerSpec| -> Result<f64, CvError> { Ok(evaluate_cv(&x, &y, &spec, cfg.folds, seed)?.accuracy) };
    let forest = score(LearnerSpec::default_for(LearnerKind::RandomForest))?;
    let svm = score(LearnerSpec::default_for(LearnerKind::Svm))?;
    let mlp = Activation::ALL
        .into_iter()
        .map(|activation| {
            let accuracy = score(LearnerSpec::Mlp(MlpParams {
                activation,
                ..Default::default()
            }))?;
            Ok(LearnerScore {
                name: format!("mlp-{}", activation.name()),
                accuracy,
            })
        })
        .collect::<Result<Vec<_>, CvError>>()?;
    Ok(OrderingRow { seed, forest, svm, mlp })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DeskConfig {
        DeskConfig {
            cohort: CohortConfig {
                n_users: 400,
                ..Default::default()
            },
            seed_trusted: 58,
            seed_untrusted: 42,
            batch_size: 20,
            folds: 3,
            stop: StopRule {
                max_rounds: 3,
                ..DeskConfig::default().stop
            },
            ..Default::default()
        }
    }

    #[test]
    fn curve_has_one_record_per_round() {
        let (curve, reason) = learning_curve(
            &small(),
            1,
            LearnerSpec::default_for(LearnerKind::RandomForest),
            Strategy::Margin,
            &Lexicon::bundled(),
        )
        .unwrap();
        assert_eq!(reason, StopReason::MaxRounds);
        let sizes: Vec<usize> = curve.iter().map(|r| r.labeled_size).collect();
        assert_eq!(sizes, vec![100, 120, 140]);
    }

    #[test]
    fn ordering_row_rule() {
        let mut row = OrderingRow {
            seed: 0,
            forest: 0.9,
            svm: 0.8,
            mlp: vec![
                LearnerScore { name: "a".into(), accuracy: 0.85 },
                LearnerScore { name: "b".into(), accuracy: 0.8 },
            ],
        };
        assert_eq!(row.worst_mlp(), 0.8);
        assert!(row.holds());
        row.svm = 0.79;
        assert!(!row.holds());
    }
}
