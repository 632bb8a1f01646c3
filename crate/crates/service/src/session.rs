//! One annotation session: the active learner, the vote book, the staged
//! labels of the current batch and the on-disk label log.
//!
//! Everything here is synchronous. The HTTP layer holds the session behind
//! a lock and runs retraining on a cloned learner.
//!
//! Persistence is an append-only JSONL log of votes and adjudications plus
//! a snapshot written after every retrain. On startup the snapshot is
//! loaded and the log entries written after it are replayed through the
//! same code path the endpoints use, so a crashed session resumes exactly.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustlens::active::{AnnotationBook, Phase, Query, ResolvedLabel, Submission};
use trustlens::ingest;
use trustlens::preprocess::{self, MaskMode};
use trustlens::scoring::{self, ScoringConfig};
use trustlens::synth;
use trustlens::{
    ActiveLearner, FeatureVector, Label, LabelSource, LabeledInstance, Lexicon, LoopConfig, Pool, TweetRecord,
};

use crate::config::{DatasetSource, ServiceConfig};
use crate::error::{ApiError, ServiceError};

pub const LOG_FILE: &str = "labels.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const SAMPLE_TWEETS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LabelEvent {
    Vote { user_id: String, annotator_id: String, label: Label },
    Adjudicate { user_id: String, adjudicator: String, label: Label },
}

#[derive(Debug, Clone)]
pub struct UserEntry {
    pub raw: FeatureVector,
    pub normalized: FeatureVector,
    pub sample_tweets: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchItem {
    pub user_id: String,
    pub features: FeatureVector,
    pub raw: FeatureVector,
    pub influence: f64,
    pub sample_tweets: Vec<String>,
    pub current_model_p1: f64,
    pub votes: usize,
    pub conflict: bool,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteResult {
    pub user_id: String,
    #[serde(flatten)]
    pub submission: Submission,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitOutcome {
    pub results: Vec<VoteResult>,
    /// Set when this submission resolved the last open item of the batch.
    pub batch_complete: bool,
}

#[derive(Deserialize)]
struct Snapshot {
    learner: ActiveLearner,
    book: AnnotationBook,
    staged: BTreeMap<String, ResolvedLabel>,
    log_len: usize,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    learner: &'a ActiveLearner,
    book: &'a AnnotationBook,
    staged: &'a BTreeMap<String, ResolvedLabel>,
    log_len: usize,
}

struct Store {
    dir: PathBuf,
    log: File,
    log_len: usize,
}

impl Store {
    fn open(dir: &Path) -> Result<(Self, Option<Snapshot>, Vec<LabelEvent>), ServiceError> {
        fs::create_dir_all(dir)?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot = if snap_path.exists() {
            let text = fs::read_to_string(&snap_path)?;
            Some(serde_json::from_str(&text).map_err(|e| ServiceError::State(format!("{}: {e}", snap_path.display())))?)
        } else {
            None
        };
        let log_path = dir.join(LOG_FILE);
        let events = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        let store = Self {
            dir: dir.to_path_buf(),
            log,
            log_len: events.len(),
        };
        Ok((store, snapshot, events))
    }

    fn append(&mut self, event: &LabelEvent) -> io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.sync_data()?;
        self.log_len += 1;
        Ok(())
    }

    fn write_snapshot(&self, snap: &SnapshotRef<'_>) -> io::Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(snap).map_err(io::Error::other)?)?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))
    }
}

/// Reads the label log. A torn final line (a crash mid-append) is dropped.
fn read_log(path: &Path) -> Result<Vec<LabelEvent>, ServiceError> {
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
    let mut events = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(ServiceError::State(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(events)
}

pub struct Session {
    learner: ActiveLearner,
    book: AnnotationBook,
    staged: BTreeMap<String, ResolvedLabel>,
    batch: Option<Vec<Query>>,
    users: BTreeMap<String, UserEntry>,
    store: Option<Store>,
    pub last_error: Option<String>,
}

fn samples(tweets: &[TweetRecord]) -> BTreeMap<String, Vec<String>> {
    let mut by_user: BTreeMap<String, Vec<&TweetRecord>> = BTreeMap::new();
    for t in tweets {
        by_user.entry(t.user_id.clone()).or_default().push(t);
    }
    by_user
        .into_iter()
        .map(|(id, mut ts)| {
            ts.sort_by_key(|t| std::cmp::Reverse(t.tweet_id));
            (id, ts.into_iter().take(SAMPLE_TWEETS).map(|t| t.text.clone()).collect())
        })
        .collect()
}

/// Scores and normalizes the configured dataset and splits it into the
/// seed set and the unlabeled pool.
fn load_pool(config: &ServiceConfig) -> Result<(Pool, BTreeMap<String, UserEntry>), ServiceError> {
    let lexicon = match &config.lexicon {
        Some(path) => Lexicon::load(path).map_err(|e| ServiceError::State(e.to_string()))?,
        None => Lexicon::bundled(),
    };
    let scoring_cfg = ScoringConfig {
        dead_zone: config.dead_zone,
        clip_percentile: config.clip_percentile,
        ..Default::default()
    };
    let (users, tweets, seeds) = match &config.dataset {
        DatasetSource::Directory { dir, seed_labels } => {
            let data = ingest::load_dataset(dir)?;
            (data.users, data.tweets, Some(ingest::read_label_table(seed_labels)?))
        }
        DatasetSource::Synthetic { cohort, .. } => {
            let c = synth::generate(cohort);
            (c.users, c.tweets, None)
        }
    };
    let scored = scoring::score_dataset(&users, &tweets, &lexicon, &scoring_cfg)?;
    let (_, normalized) =
        preprocess::fit_transform(&scored.vectors, config.clip_percentile, &preprocess::default_unbounded())?;
    let mut sample_map = samples(&tweets);
    let entries = scored
        .vectors
        .iter()
        .zip(&normalized)
        .map(|(raw, norm)| {
            let entry = UserEntry {
                raw: raw.clone(),
                normalized: norm.clone(),
                sample_tweets: sample_map.remove(&raw.user_id).unwrap_or_default(),
            };
            (raw.user_id.clone(), entry)
        })
        .collect::<BTreeMap<_, _>>();

    let pool = match (&config.dataset, seeds) {
        (DatasetSource::Synthetic { cohort, seed_trusted, seed_untrusted }, _) => {
            let truth = synth::generate(cohort).truth;
            synth::seeded_pool(normalized, &truth, *seed_trusted, *seed_untrusted, config.batch_size, cohort.seed)?
        }
        (DatasetSource::Directory { .. }, Some(seeds)) => {
            if let Some(missing) = seeds.keys().find(|id| !entries.contains_key(*id)) {
                return Err(ServiceError::SeedLabels(format!("user {missing} is not in the dataset")));
            }
            let (labeled, unlabeled): (Vec<_>, Vec<_>) =
                normalized.into_iter().partition(|v| seeds.contains_key(&v.user_id));
            let labeled = labeled
                .into_iter()
                .map(|features| LabeledInstance {
                    label: seeds[&features.user_id],
                    features,
                    annotator_ids: vec![],
                    source: LabelSource::Seed,
                })
                .collect();
            Pool::new(labeled, unlabeled, config.batch_size)?
        }
        (DatasetSource::Directory { .. }, None) => unreachable!("directory sources always read seed labels"),
    };
    Ok((pool, entries))
}

pub fn loop_config(config: &ServiceConfig) -> Result<LoopConfig, ServiceError> {
    let mode: MaskMode = config.features.parse().expect("infallible");
    let features = preprocess::feature_mask(&mode)?;
    let mut cfg = LoopConfig::new(config.learner.clone(), config.strategy, features);
    cfg.folds = config.folds;
    cfg.cv_seed = config.cv_seed;
    cfg.selection_seed = config.selection_seed;
    cfg.stop = config.stop;
    Ok(cfg)
}

impl Session {
    /// Builds the session and, if a state directory is configured, restores
    /// it from the snapshot and label log.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let (pool, users) = load_pool(config)?;
        let mut session = Self {
            learner: ActiveLearner::new(pool, loop_config(config)?)?,
            book: AnnotationBook::new(config.annotators_required).map_err(|e| ServiceError::State(e.to_string()))?,
            staged: BTreeMap::new(),
            batch: None,
            users,
            store: None,
            last_error: None,
        };
        let Some(dir) = &config.state_dir else {
            return Ok(session);
        };
        let (store, snapshot, events) = Store::open(dir)?;
        let mut replay_from = 0;
        if let Some(snap) = snapshot {
            if snap.learner.config() != session.learner.config() {
                return Err(ServiceError::State("snapshot was written with a different learner configuration".into()));
            }
            if snap.log_len > events.len() {
                return Err(ServiceError::State("snapshot is newer than the label log".into()));
            }
            session.learner = snap.learner;
            session.learner.refit()?;
            session.book = snap.book;
            session.staged = snap.staged;
            replay_from = snap.log_len;
        }
        for event in events.into_iter().skip(replay_from) {
            if session.learner.phase() == Phase::Evaluate {
                session.learner.evaluate_round()?;
            }
            session
                .apply(event, false)
                .map_err(|e| ServiceError::Replay(e.to_string()))?;
        }
        session.store = Some(store);
        Ok(session)
    }

    pub fn learner(&self) -> &ActiveLearner {
        &self.learner
    }

    pub fn book(&self) -> &AnnotationBook {
        &self.book
    }

    pub fn user(&self, user_id: &str) -> Option<&UserEntry> {
        self.users.get(user_id)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Known label of a user, from the seed set or an earlier batch.
    pub fn label_of(&self, user_id: &str) -> Option<Label> {
        self.learner.pool().find_labeled(user_id).map(|l| l.label)
    }

    fn batch(&mut self) -> Result<&[Query], ApiError> {
        match self.learner.phase() {
            Phase::Query => {}
            Phase::Evaluate => return Err(ApiError::Conflict("the model has not been trained on the current labels".into())),
            Phase::Finished(reason) => return Err(ApiError::Conflict(format!("the loop has finished ({reason:?})"))),
        }
        if self.batch.is_none() {
            self.batch = Some(self.learner.select().map_err(|e| ApiError::Internal(e.to_string()))?);
        }
        Ok(self.batch.as_deref().expect("just filled"))
    }

    /// The batch being annotated. Repeated calls return the same items
    /// until the batch is complete.
    pub fn batch_items(&mut self) -> Result<Vec<BatchItem>, ApiError> {
        let batch = self.batch()?.to_vec();
        Ok(batch
            .into_iter()
            .map(|q| {
                let id = q.features.user_id.clone();
                let entry = &self.users[&id];
                BatchItem {
                    influence: entry.raw.influence,
                    raw: entry.raw.clone(),
                    sample_tweets: entry.sample_tweets.clone(),
                    current_model_p1: q.proba[1],
                    votes: self.book.votes_for(&id),
                    conflict: self.book.has_conflict(&id),
                    resolved: self.staged.contains_key(&id),
                    features: q.features,
                    user_id: id,
                }
            })
            .collect())
    }

    fn check_in_batch(&mut self, user_id: &str) -> Result<(), ApiError> {
        if !self.users.contains_key(user_id) {
            return Err(ApiError::Unprocessable(format!("unknown user {user_id}")));
        }
        if !self.batch()?.iter().any(|q| q.features.user_id == user_id) {
            return Err(ApiError::Unprocessable(format!("user {user_id} is not in the current batch")));
        }
        Ok(())
    }

    /// Records votes. The whole request is validated before any vote is
    /// applied, so a rejected request changes nothing.
    pub fn submit(&mut self, votes: Vec<(String, String, Label)>) -> Result<SubmitOutcome, ApiError> {
        for (user_id, annotator_id, _) in &votes {
            if annotator_id.trim().is_empty() {
                return Err(ApiError::BadRequest("annotator_id must not be empty".into()));
            }
            self.check_in_batch(user_id)?;
        }
        let mut results = Vec::with_capacity(votes.len());
        let mut batch_complete = false;
        for (user_id, annotator_id, label) in votes {
            let event = LabelEvent::Vote {
                user_id: user_id.clone(),
                annotator_id,
                label,
            };
            let (submission, complete) = self.apply(event, true)?;
            batch_complete |= complete;
            results.push(VoteResult { user_id, submission });
        }
        Ok(SubmitOutcome { results, batch_complete })
    }

    pub fn adjudicate(&mut self, user_id: String, adjudicator: String, label: Label) -> Result<SubmitOutcome, ApiError> {
        if adjudicator.trim().is_empty() {
            return Err(ApiError::BadRequest("adjudicator must not be empty".into()));
        }
        self.check_in_batch(&user_id)?;
        if !self.book.has_conflict(&user_id) {
            return Err(ApiError::Conflict(format!("user {user_id} has no open conflict")));
        }
        let event = LabelEvent::Adjudicate {
            user_id: user_id.clone(),
            adjudicator,
            label,
        };
        let (submission, batch_complete) = self.apply(event, true)?;
        Ok(SubmitOutcome {
            results: vec![VoteResult { user_id, submission }],
            batch_complete,
        })
    }

    /// Applies one event; shared by the endpoints and log replay.
    fn apply(&mut self, event: LabelEvent, log: bool) -> Result<(Submission, bool), ApiError> {
        let user_id = match &event {
            LabelEvent::Vote { user_id, .. } | LabelEvent::Adjudicate { user_id, .. } => user_id.clone(),
        };
        self.check_in_batch(&user_id)?;
        if let Some(done) = self.staged.get(&user_id) {
            let submission = Submission::Agreed {
                label: done.label,
                annotator_ids: done.annotator_ids.clone(),
            };
            return Ok((submission, false));
        }
        let submission = match &event {
            LabelEvent::Vote { annotator_id, label, .. } => self.book.submit(&user_id, annotator_id, *label),
            LabelEvent::Adjudicate { adjudicator, label, .. } => self
                .book
                .adjudicate(&user_id, *label, adjudicator)
                .map_err(|e| ApiError::Conflict(e.to_string()))?,
        };
        if log {
            if let Some(store) = &mut self.store {
                store.append(&event).map_err(|e| ApiError::Internal(format!("label log: {e}")))?;
            }
        }
        if let Submission::Agreed { label, annotator_ids } = &submission {
            self.staged.insert(
                user_id.clone(),
                ResolvedLabel {
                    user_id,
                    label: *label,
                    annotator_ids: annotator_ids.clone(),
                    source: LabelSource::ActiveLoop,
                },
            );
        }
        let complete = self.complete_batch_if_resolved()?;
        Ok((submission, complete))
    }

    fn complete_batch_if_resolved(&mut self) -> Result<bool, ApiError> {
        let order: Vec<String> = self.batch()?.iter().map(|q| q.features.user_id.clone()).collect();
        if self.staged.len() < order.len() {
            return Ok(false);
        }
        // selection order, as the simulated loop applies them; the order of
        // the labeled set feeds the learners' resampling
        let mut staged = std::mem::take(&mut self.staged);
        let labels = order.iter().filter_map(|id| staged.remove(id)).collect();
        self.learner
            .apply_labels(labels)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        self.batch = None;
        Ok(true)
    }

    pub fn needs_training(&self) -> bool {
        self.learner.phase() == Phase::Evaluate
    }

    /// A copy of the learner to retrain outside the lock.
    pub fn retrain_job(&self) -> Result<ActiveLearner, ApiError> {
        if !self.needs_training() {
            return Err(ApiError::Conflict("no labels are waiting to be trained on".into()));
        }
        Ok(self.learner.clone())
    }

    /// Installs a retrained learner and writes a snapshot.
    pub fn finish_retrain(&mut self, learner: ActiveLearner) -> io::Result<()> {
        self.learner = learner;
        self.batch = None;
        self.last_error = None;
        self.snapshot()
    }

    /// Trains in place; used at startup and by tests.
    pub fn train_now(&mut self) -> Result<(), ServiceError> {
        if self.needs_training() {
            self.learner.evaluate_round()?;
            self.batch = None;
            self.snapshot()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> io::Result<()> {
        let Some(store) = &self.store else {
            return Ok(());
        };
        store.write_snapshot(&SnapshotRef {
            learner: &self.learner,
            book: &self.book,
            staged: &self.staged,
            log_len: store.log_len,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trustlens::synth::CohortConfig;

    fn config() -> ServiceConfig {
        let mut cfg = ServiceConfig {
            dataset: DatasetSource::Synthetic {
                cohort: CohortConfig {
                    n_users: 200,
                    seed: 5,
                    ..Default::default()
                },
                seed_trusted: 20,
                seed_untrusted: 20,
            },
            batch_size: 4,
            folds: 3,
            ..Default::default()
        };
        cfg.learner = trustlens::LearnerSpec::RandomForest(trustlens::learners::ForestParams {
            n_trees: 15,
            ..Default::default()
        });
        cfg
    }

    fn ids(session: &mut Session) -> Vec<String> {
        session.batch_items().unwrap().into_iter().map(|i| i.user_id).collect()
    }

    #[test]
    fn untrained_session_has_no_batch() {
        let mut s = Session::open(&config()).unwrap();
        assert!(matches!(s.batch_items(), Err(ApiError::Conflict(_))));
        s.train_now().unwrap();
        assert_eq!(ids(&mut s).len(), 4);
        assert_eq!(ids(&mut s), ids(&mut s));
    }

    #[test]
    fn disagreement_needs_adjudication() {
        let mut s = Session::open(&config()).unwrap();
        s.train_now().unwrap();
        let batch = ids(&mut s);
        let first = batch[0].clone();
        s.submit(vec![(first.clone(), "a".into(), Label::Trusted)]).unwrap();
        let out = s.submit(vec![(first.clone(), "b".into(), Label::Untrusted)]).unwrap();
        assert_eq!(out.results[0].submission, Submission::Conflict);
        assert_eq!(s.book().conflicts().len(), 1);
        for id in &batch[1..] {
            for a in ["a", "b"] {
                s.submit(vec![(id.clone(), a.into(), Label::Trusted)]).unwrap();
            }
        }
        assert!(!s.needs_training());
        let out = s.adjudicate(first, "lead".into(), Label::Untrusted).unwrap();
        assert!(out.batch_complete);
        assert!(s.needs_training());
        assert_eq!(s.learner().pool().labeled().len(), 44);
    }

    #[test]
    fn rejected_request_changes_nothing() {
        let mut s = Session::open(&config()).unwrap();
        s.train_now().unwrap();
        let batch = ids(&mut s);
        let err = s
            .submit(vec![
                (batch[0].clone(), "a".into(), Label::Trusted),
                ("nobody".into(), "a".into(), Label::Trusted),
            ])
            .unwrap_err();
        assert!(matches!(err, ApiError::Unprocessable(_)));
        assert_eq!(s.book().votes_for(&batch[0]), 0);
    }

    #[test]
    fn log_replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config();
        cfg.state_dir = Some(dir.path().to_path_buf());
        let mut s = Session::open(&cfg).unwrap();
        s.train_now().unwrap();
        let batch = ids(&mut s);
        for id in &batch {
            for a in ["a", "b"] {
                s.submit(vec![(id.clone(), a.into(), Label::Untrusted)]).unwrap();
            }
        }
        s.train_now().unwrap();
        let half = ids(&mut s);
        s.submit(vec![(half[0].clone(), "a".into(), Label::Trusted)]).unwrap();
        let curve = s.learner().curve().to_vec();
        drop(s);

        let mut again = Session::open(&cfg).unwrap();
        assert_eq!(again.learner().curve(), &curve[..]);
        assert_eq!(ids(&mut again), half);
        assert_eq!(again.book().votes_for(&half[0]), 1);

        // without the snapshot the whole log is replayed
        fs::remove_file(dir.path().join(SNAPSHOT_FILE)).unwrap();
        let mut cold = Session::open(&cfg).unwrap();
        assert_eq!(cold.learner().curve(), &curve[..]);
        assert_eq!(ids(&mut cold), half);
    }

    #[test]
    fn torn_log_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        fs::write(
            &path,
            "{\"event\":\"vote\",\"user_id\":\"u\",\"annotator_id\":\"a\",\"label\":1}\n{\"event\":\"vo",
        )
        .unwrap();
        assert_eq!(read_log(&path).unwrap().len(), 1);
    }
}
