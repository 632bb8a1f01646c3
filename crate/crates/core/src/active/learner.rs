//! The pool-based active-learning loop.
//!
//! Each round trains on the labeled set, records its cross-validated
//! metrics, then (unless a stop condition fired) selects a batch, asks the
//! oracle for labels and moves the batch into the labeled set. Rounds are
//! numbered from 1; the first round evaluates the seed set alone.
//!
//! The loop is a small state machine so that an HTTP front end can drive
//! the same transitions one request at a time: [`ActiveLearner::evaluate_round`],
//! [`ActiveLearner::select`], [`ActiveLearner::apply_labels`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cv::{self, CvError, DEFAULT_FOLDS};
use super::pool::{Pool, PoolError};
use super::strategy::{self, Candidate, Strategy};
use crate::learners::{LearnerError, LearnerSpec, Matrix, Model, ProbabilisticClassifier};
use crate::model::{Feature, FeatureVector, Label, LabelSource, ModelState, RoundRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub max_rounds: usize,
    /// Minimum accuracy gain over the previous round that counts as progress.
    pub min_gain: f64,
    /// Consecutive rounds without progress before stopping.
    pub patience: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_rounds: 50,
            min_gain: 0.005,
            patience: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub spec: LearnerSpec,
    pub strategy: Strategy,
    pub features: Vec<Feature>,
    pub folds: usize,
    pub cv_seed: u64,
    pub selection_seed: u64,
    pub stop: StopRule,
}

impl LoopConfig {
    pub fn new(spec: LearnerSpec, strategy: Strategy, features: Vec<Feature>) -> Self {
        Self {
            spec,
            strategy,
            features,
            folds: DEFAULT_FOLDS,
            cv_seed: 0,
            selection_seed: 0,
            stop: StopRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
    PoolExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "reason", rename_all = "snake_case")]
pub enum Phase {
    /// Next step trains and evaluates a new round.
    Evaluate,
    /// A batch is waiting for labels.
    Query,
    Finished(StopReason),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("seed set must contain both classes")]
    SeedSet,
    #[error("operation not valid in phase {0:?}")]
    WrongPhase(Phase),
    #[error("oracle failed on {user_id} in round {round}: {message}")]
    Oracle { round: usize, user_id: String, message: String },
    #[error("labels do not match the selected batch")]
    BatchMismatch,
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct OracleError(pub String);

/// Source of labels for queried instances.
pub trait Oracle {
    fn label(&mut self, instance: &FeatureVector) -> Result<Label, OracleError>;

    fn annotator_ids(&self) -> Vec<String> {
        vec!["oracle".into()]
    }

    fn source(&self) -> LabelSource {
        LabelSource::ActiveLoop
    }
}

impl<F: FnMut(&FeatureVector) -> Result<Label, OracleError>> Oracle for F {
    fn label(&mut self, instance: &FeatureVector) -> Result<Label, OracleError> {
        self(instance)
    }
}

/// A queried instance with the current model's class probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub features: FeatureVector,
    pub proba: [f64; 2],
}

/// A label ready to be moved into the labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLabel {
    pub user_id: String,
    pub label: Label,
    pub annotator_ids: Vec<String>,
    pub source: LabelSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActiveLearner {
    config: LoopConfig,
    pool: Pool,
    state: ModelState,
    #[serde(skip)]
    model: Option<Model>,
    phase: Phase,
    round: usize,
    prev_accuracy: f64,
    stalls: usize,
}

pub fn design_matrix(vectors: &[&FeatureVector], features: &[Feature]) -> Matrix {
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.select(features)).collect();
    Matrix::from_rows(&rows).expect("rows share the feature mask")
}

impl ActiveLearner {
    pub fn new(pool: Pool, config: LoopConfig) -> Result<Self, LoopError> {
        let has = |l: Label| pool.labeled().iter().any(|i| i.label == l);
        if !has(Label::Trusted) || !has(Label::Untrusted) {
            return Err(LoopError::SeedSet);
        }
        let state = ModelState::new(config.spec.kind(), config.spec.hyperparameters());
        Ok(Self {
            config,
            pool,
            state,
            model: None,
            phase: Phase::Evaluate,
            round: 0,
            prev_accuracy: 0.0,
            stalls: 0,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn model(&self) -> Option<&Model> {
        self.model.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn curve(&self) -> &[RoundRecord] {
        &self.state.history
    }

    fn training_data(&self) -> (Matrix, Vec<Label>) {
        let vs: Vec<&FeatureVector> = self.pool.labeled().iter().map(|l| &l.features).collect();
        let y = self.pool.labeled().iter().map(|l| l.label).collect();
        (design_matrix(&vs, &self.config.features), y)
    }

    /// Rebuilds the model after deserializing a learner.
    pub fn refit(&mut self) -> Result<(), LoopError> {
        if self.state.trained {
            let (x, y) = self.training_data();
            self.model = Some(self.config.spec.fit(&x, &y)?);
        }
        Ok(())
    }

    /// Trains on the labeled set, evaluates it by cross-validation and
    /// applies the stop rule.
    pub fn evaluate_round(&mut self) -> Result<&RoundRecord, LoopError> {
        if self.phase != Phase::Evaluate {
            return Err(LoopError::WrongPhase(self.phase));
        }
        let (x, y) = self.training_data();
        let metrics = cv::evaluate_cv(&x, &y, &self.config.spec, self.config.folds, self.config.cv_seed)?;
        let model = self.config.spec.fit(&x, &y)?;
        let round = self.round + 1;
        self.state.push_round(RoundRecord {
            round_index: round,
            labeled_size: y.len(),
            metrics,
        })
        .expect("rounds increase");
        self.state.trained = true;
        self.state.training_set_size = y.len();
        self.model = Some(model);
        self.round = round;

        let gain = metrics.accuracy - self.prev_accuracy;
        self.prev_accuracy = metrics.accuracy;
        if gain < self.config.stop.min_gain {
            self.stalls += 1;
        } else {
            self.stalls = 0;
        }
        self.phase = if self.stalls >= self.config.stop.patience {
            Phase::Finished(StopReason::Converged)
        } else if round >= self.config.stop.max_rounds {
            Phase::Finished(StopReason::MaxRounds)
        } else if self.pool.unlabeled().is_empty() {
            Phase::Finished(StopReason::PoolExhausted)
        } else {
            Phase::Query
        };
        Ok(self.state.history.last().expect("just pushed"))
    }

    /// The batch to label next, most ambiguous first. Deterministic for a
    /// given state, so repeated calls return the same batch.
    pub fn select(&self) -> Result<Vec<Query>, LoopError> {
        if self.phase != Phase::Query {
            return Err(LoopError::WrongPhase(self.phase));
        }
        let model = self.model.as_ref().ok_or(LoopError::WrongPhase(self.phase))?;
        let unlabeled = self.pool.unlabeled();
        let probas: Vec<[f64; 2]> = unlabeled
            .iter()
            .map(|v| model.predict_proba(&v.select(&self.config.features)))
            .collect();
        let candidates: Vec<Candidate<'_>> = unlabeled
            .iter()
            .zip(&probas)
            .map(|(v, p)| Candidate {
                user_id: &v.user_id,
                proba: *p,
            })
            .collect();
        let seed = self.config.selection_seed.wrapping_add(self.round as u64);
        let picked = strategy::select_batch(&candidates, self.config.strategy, self.pool.batch_size(), seed);
        Ok(picked
            .into_iter()
            .map(|i| Query {
                features: unlabeled[i].clone(),
                proba: probas[i],
            })
            .collect())
    }

    /// Moves a fully labeled batch into the labeled set. `labels` must
    /// cover exactly the users returned by [`ActiveLearner::select`].
    pub fn apply_labels(&mut self, labels: Vec<ResolvedLabel>) -> Result<(), LoopError> {
        let mut expected: Vec<String> = self.select()?.into_iter().map(|q| q.features.user_id).collect();
        let mut got: Vec<String> = labels.iter().map(|l| l.user_id.clone()).collect();
        expected.sort();
        got.sort();
        if expected != got {
            return Err(LoopError::BatchMismatch);
        }
        for l in labels {
            self.pool.label(&l.user_id, l.label, l.annotator_ids, l.source)?;
        }
        self.phase = Phase::Evaluate;
        Ok(())
    }

    /// Runs one transition. An oracle failure leaves the learner in the
    /// query phase with its pool untouched, so the call can be retried.
    pub fn step(&mut self, oracle: &mut dyn Oracle) -> Result<Phase, LoopError> {
        match self.phase {
            Phase::Evaluate => {
                self.evaluate_round()?;
            }
            Phase::Query => {
                let batch = self.select()?;
                let mut labels = Vec::with_capacity(batch.len());
                for q in &batch {
                    let label = oracle.label(&q.features).map_err(|e| LoopError::Oracle {
                        round: self.round,
                        user_id: q.features.user_id.clone(),
                        message: e.0,
                    })?;
                    labels.push(ResolvedLabel {
                        user_id: q.features.user_id.clone(),
                        label,
                        annotator_ids: oracle.annotator_ids(),
                        source: oracle.source(),
                    });
                }
                self.apply_labels(labels)?;
            }
            Phase::Finished(_) => {}
        }
        Ok(self.phase)
    }

    /// Steps until a stop condition fires.
    pub fn run(&mut self, oracle: &mut dyn Oracle) -> Result<StopReason, LoopError> {
        loop {
            if let Phase::Finished(reason) = self.step(oracle)? {
                return Ok(reason);
            }
        }
    }
}

/// Convenience wrapper: runs a fresh loop to completion.
pub fn run_loop(pool: Pool, config: LoopConfig, oracle: &mut dyn Oracle) -> Result<(ModelState, Vec<RoundRecord>, StopReason), LoopError> {
    let mut learner = ActiveLearner::new(pool, config)?;
    let reason = learner.run(oracle)?;
    let curve = learner.curve().to_vec();
    Ok((learner.state, curve, reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ForestParams;
    use crate::model::LabeledInstance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    const FEATS: [Feature; 2] = [Feature::RRet, Feature::RLik];

    /// Two overlapping clusters; truth is the side of the diagonal.
    fn world(n: usize, seed: u64) -> (Vec<FeatureVector>, HashMap<String, Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vs = Vec::new();
        let mut truth = HashMap::new();
        for i in 0..n {
            let mut v = FeatureVector::empty(format!("u{i:04}"));
            v.r_ret = rng.random();
            v.r_lik = rng.random();
            let noisy = v.r_ret + v.r_lik + rng.random_range(-0.15..0.15);
            truth.insert(v.user_id.clone(), Label::from_index(usize::from(noisy > 1.0)));
            vs.push(v);
        }
        (vs, truth)
    }

    fn pool(n: usize, seed_n: usize, batch: usize) -> (Pool, HashMap<String, Label>) {
        let (vs, truth) = world(n, 1);
        let (seed, rest) = vs.split_at(seed_n);
        let labeled = seed
            .iter()
            .map(|v| LabeledInstance {
                features: v.clone(),
                label: truth[&v.user_id],
                annotator_ids: vec![],
                source: LabelSource::Seed,
            })
            .collect();
        (Pool::new(labeled, rest.to_vec(), batch).unwrap(), truth)
    }

    fn config(strategy: Strategy) -> LoopConfig {
        let spec = LearnerSpec::RandomForest(ForestParams { n_trees: 15, ..Default::default() });
        LoopConfig::new(spec, strategy, FEATS.to_vec())
    }

    fn oracle(truth: &HashMap<String, Label>) -> impl FnMut(&FeatureVector) -> Result<Label, OracleError> + '_ {
        move |v| Ok(truth[&v.user_id])
    }

    #[test]
    fn labeled_size_grows_by_batch() {
        let (p, truth) = pool(300, 40, 20);
        let mut cfg = config(Strategy::Margin);
        cfg.stop = StopRule { max_rounds: 5, min_gain: -1.0, patience: 2 };
        let (state, curve, reason) = run_loop(p, cfg, &mut oracle(&truth)).unwrap();
        assert_eq!(reason, StopReason::MaxRounds);
        assert_eq!(curve.len(), 5);
        for r in &curve {
            assert_eq!(r.labeled_size, 40 + (r.round_index - 1) * 20);
        }
        assert_eq!(state.training_set_size, 120);
    }

    #[test]
    fn min_gain_one_stops_after_round_two() {
        let (p, truth) = pool(300, 40, 20);
        let mut cfg = config(Strategy::Margin);
        cfg.stop.min_gain = 1.0;
        let (_, curve, reason) = run_loop(p, cfg, &mut oracle(&truth)).unwrap();
        assert_eq!(reason, StopReason::Converged);
        assert_eq!(curve.len(), 2);
    }

    #[test]
    fn empty_pool_returns_after_round_one() {
        let (p, truth) = pool(40, 40, 20);
        let (_, curve, reason) = run_loop(p, config(Strategy::Margin), &mut oracle(&truth)).unwrap();
        assert_eq!(reason, StopReason::PoolExhausted);
        assert_eq!(curve.len(), 1);
    }

    #[test]
    fn oracle_failure_is_resumable() {
        let (p, truth) = pool(200, 40, 20);
        let mut learner = ActiveLearner::new(p, config(Strategy::Entropy)).unwrap();
        learner.step(&mut oracle(&truth)).unwrap();
        let before = learner.pool().clone();
        let mut calls = 0;
        let mut flaky = |v: &FeatureVector| {
            calls += 1;
            if calls == 5 {
                Err(OracleError("annotator went home".into()))
            } else {
                Ok(truth[&v.user_id])
            }
        };
        let err = learner.step(&mut flaky).unwrap_err();
        assert!(matches!(err, LoopError::Oracle { round: 1, .. }));
        assert_eq!(learner.pool(), &before);
        assert_eq!(learner.phase(), Phase::Query);
        assert_eq!(learner.step(&mut oracle(&truth)).unwrap(), Phase::Evaluate);
        assert_eq!(learner.pool().labeled().len(), 60);
    }

    #[test]
    fn random_strategy_never_duplicates() {
        let (p, truth) = pool(200, 40, 30);
        let mut cfg = config(Strategy::Random);
        cfg.stop = StopRule { max_rounds: 100, min_gain: -1.0, patience: 2 };
        let mut learner = ActiveLearner::new(p, cfg).unwrap();
        assert_eq!(learner.run(&mut oracle(&truth)).unwrap(), StopReason::PoolExhausted);
        let ids: HashSet<&str> = learner.pool().labeled().iter().map(|l| l.features.user_id.as_str()).collect();
        assert_eq!(ids.len(), 200);
        assert_eq!(learner.pool().labeled().len(), 200);
    }

    #[test]
    fn select_is_idempotent_and_apply_checks_batch() {
        let (p, truth) = pool(200, 40, 10);
        let mut learner = ActiveLearner::new(p, config(Strategy::Margin)).unwrap();
        learner.evaluate_round().unwrap();
        let a = learner.select().unwrap();
        assert_eq!(a, learner.select().unwrap());
        let partial: Vec<ResolvedLabel> = a[..5]
            .iter()
            .map(|q| ResolvedLabel {
                user_id: q.features.user_id.clone(),
                label: truth[&q.features.user_id],
                annotator_ids: vec![],
                source: LabelSource::ActiveLoop,
            })
            .collect();
        assert_eq!(learner.apply_labels(partial), Err(LoopError::BatchMismatch));
        assert!(matches!(learner.evaluate_round(), Err(LoopError::WrongPhase(Phase::Query))));
    }

    #[test]
    fn seed_needs_both_classes() {
        let v = FeatureVector::empty("a");
        let l = vec![LabeledInstance {
            features: v,
            label: Label::Trusted,
            annotator_ids: vec![],
            source: LabelSource::Seed,
        }];
        let p = Pool::new(l, vec![], 1).unwrap();
        assert!(matches!(ActiveLearner::new(p, config(Strategy::Margin)), Err(LoopError::SeedSet)));
    }
}
