//! Synthetic cohorts with known labels, for experiments and CI.
//!
//! Each user has a latent credibility `z ~ N(0, 1)`; the top `trusted_share`
//! of users by `z` are trusted. Every observable is driven by its own noisy
//! copy of the latent, `s = rho z + sqrt(1 - rho^2) e`, so trusted users
//! tend to have more followers and listings, more engaged tweets (and so
//! higher h-indexes), more original and more positive content, and fewer
//! hashtags, while any single feature is only a weak signal.
//!
//! Whether a user is listed at all agrees with the label with probability
//! `listing_agreement`. A small share of celebrities, independent of the
//! label, get audiences and listings orders of magnitude larger, so after
//! clipping and min-max scaling the listing signal lives in a narrow band
//! near zero: easy for threshold splits, hard for distance-based learners.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{Oracle, OracleError, Pool, PoolError};
use crate::model::{FeatureVector, Label, LabelSource, LabeledInstance, TweetRecord, UserProfile};
use crate::preprocess::{self, PreprocessError};
use crate::scoring::{self, ScoringConfig, ScoringError};
use crate::sentiment::Lexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_users: usize,
    pub trusted_share: f64,
    /// Correlation between each observable's driver and the latent.
    pub signal: f64,
    /// Probability that a user is listed at all exactly when trusted.
    pub listing_agreement: f64,
    /// Share of users with very large audiences, unrelated to trust.
    pub celebrity_share: f64,
    pub min_tweets: usize,
    pub max_tweets: usize,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_users: 5000,
            trusted_share: 0.582,
            signal: 0.85,
            listing_agreement: 0.93,
            celebrity_share: 0.03,
            min_tweets: 20,
            max_tweets: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub users: Vec<UserProfile>,
    pub tweets: Vec<TweetRecord>,
    pub truth: BTreeMap<String, Label>,
}

const POSITIVE: [&str; 6] = ["good", "great", "honest", "happy", "wonderful", "excellent"];
const NEGATIVE: [&str; 6] = ["bad", "terrible", "corrupt", "fake", "sad", "wrong"];
const FILLER: [&str; 12] = [
    "today", "meeting", "vote", "city", "policy", "people", "budget", "school", "plan", "council", "road", "tax",
];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Driver<'a> {
    rng: &'a mut ChaCha8Rng,
    rho: f64,
    z: f64,
}

impl Driver<'_> {
    fn draw(&mut self) -> f64 {
        let e: f64 = StandardNormal.sample(self.rng);
        self.rho * self.z + (1.0 - self.rho * self.rho).sqrt() * e
    }

    fn noise(&mut self) -> f64 {
        StandardNormal.sample(self.rng)
    }
}

fn lognormal_count(mu: f64, sigma: f64, s: f64) -> u64 {
    (mu + sigma * s).exp().round().max(0.0) as u64
}

pub fn generate(cfg: &CohortConfig) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_users;
    let latent: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]));
    let n_trusted = (cfg.trusted_share * n as f64).round() as usize;
    let mut labels = vec![Label::Untrusted; n];
    for &i in &order[..n_trusted.min(n)] {
        labels[i] = Label::Trusted;
    }

    let mut users = Vec::with_capacity(n);
    let mut tweets = Vec::new();
    let mut truth = BTreeMap::new();
    let mut next_tweet_id: u64 = 1_000_000;
    let rho = cfg.signal.clamp(0.0, 1.0);
    let agreement = cfg.listing_agreement.clamp(0.0, 1.0);
    for (i, &z) in latent.iter().enumerate() {
        let user_id = format!("u{i:05}");
        let mut d = Driver { rng: &mut rng, rho, z };
        let mut followers = lognormal_count(5.0, 1.6, d.draw()).max(1);
        let friends = lognormal_count(5.5, 0.9, 0.6 * d.noise() - 0.4 * d.draw()).max(1);
        // Being listed at all tracks trust closely; how often does not.
        let agrees = d.rng.random_bool(agreement);
        let mut listed = if (labels[i] == Label::Trusted) == agrees {
            lognormal_count(1.2, 0.9, d.noise()).max(1)
        } else {
            0
        };
        let engagement = d.draw();
        let hashtag_p = sigmoid(-0.3 - 1.0 * d.draw());
        let retweet_p = sigmoid(-0.8 - 1.0 * d.draw());
        let positive_p = sigmoid(0.2 + 1.2 * d.draw());
        let status_driver = d.draw();

        if rng.random_bool(cfg.celebrity_share.clamp(0.0, 1.0)) {
            let boost = rng.random_range(200..2000);
            followers *= boost;
            listed = listed.max(1) * boost;
        }

        let n_tweets = rng.random_range(cfg.min_tweets..=cfg.max_tweets.max(cfg.min_tweets));
        let statuses = n_tweets as u64 + lognormal_count(6.0, 1.0, status_driver);
        for _ in 0..n_tweets {
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            let retweet_count = lognormal_count(0.8, 1.2, engagement + 0.75 * e1).saturating_sub(1);
            let like_count = lognormal_count(1.5, 1.3, engagement + 0.75 * e2).saturating_sub(1);
            let mut words: Vec<&str> = (0..3).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
            if rng.random_bool(0.7) {
                let pool = if rng.random_bool(positive_p) { &POSITIVE } else { &NEGATIVE };
                words.insert(rng.random_range(0..=words.len()), pool.choose(&mut rng).expect("non-empty"));
            }
            tweets.push(TweetRecord {
                tweet_id: next_tweet_id,
                user_id: user_id.clone(),
                retweet_count,
                like_count,
                has_url: rng.random_bool(0.5),
                has_hashtag: rng.random_bool(hashtag_p),
                is_retweet_of_other: rng.random_bool(retweet_p),
                text: words.join(" "),
            });
            next_tweet_id += 1;
        }
        users.push(UserProfile {
            user_id: user_id.clone(),
            followers,
            friends,
            statuses,
            listed,
            is_public: true,
        });
        truth.insert(user_id, labels[i]);
    }
    Cohort { users, tweets, truth }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need {needed} {label:?} users for the seed set, cohort has {available}")]
    SeedTooLarge { label: Label, needed: usize, available: usize },
    #[error("user {0} has no known label")]
    Unknown(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

/// Scores the cohort and normalizes it with the default clip settings.
pub fn feature_vectors(cohort: &Cohort, lexicon: &Lexicon) -> Result<Vec<FeatureVector>, SynthError> {
    let scored = scoring::score_dataset(&cohort.users, &cohort.tweets, lexicon, &ScoringConfig::default())?;
    let (_, normalized) = preprocess::fit_transform(
        &scored.vectors,
        preprocess::DEFAULT_PERCENTILE,
        &preprocess::default_unbounded(),
    )?;
    Ok(normalized)
}

/// Draws a seed set with exactly `n_trusted` and `n_untrusted` users; the
/// rest becomes the unlabeled pool.
pub fn seeded_pool(
    vectors: Vec<FeatureVector>,
    truth: &BTreeMap<String, Label>,
    n_trusted: usize,
    n_untrusted: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Pool, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: [Vec<FeatureVector>; 2] = [Vec::new(), Vec::new()];
    for v in vectors {
        let label = *truth.get(&v.user_id).ok_or_else(|| SynthError::Unknown(v.user_id.clone()))?;
        by_class[label.as_index()].push(v);
    }
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for (label, want) in [(Label::Untrusted, n_untrusted), (Label::Trusted, n_trusted)] {
        let mut members = std::mem::take(&mut by_class[label.as_index()]);
        if members.len() < want {
            return Err(SynthError::SeedTooLarge {
                label,
                needed: want,
                available: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let rest = members.split_off(want);
        labeled.extend(members.into_iter().map(|features| LabeledInstance {
            features,
            label,
            annotator_ids: vec![],
            source: LabelSource::Seed,
        }));
        unlabeled.extend(rest);
    }
    labeled.sort_by(|a, b| a.features.user_id.cmp(&b.features.user_id));
    unlabeled.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    Ok(Pool::new(labeled, unlabeled, batch_size)?)
}

/// Answers queries from a table of known labels.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    truth: HashMap<String, Label>,
    name: String,
}

impl SyntheticOracle {
    pub fn new(truth: impl IntoIterator<Item = (String, Label)>) -> Self {
        Self {
            truth: truth.into_iter().collect(),
            name: "synthetic".into(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn truth(&self, user_id: &str) -> Option<Label> {
        self.truth.get(user_id).copied()
    }
}

impl Oracle for SyntheticOracle {
    fn label(&mut self, instance: &FeatureVector) -> Result<Label, OracleError> {
        self.truth(&instance.user_id)
            .ok_or_else(|| OracleError(format!("no label for {}", instance.user_id)))
    }

    fn annotator_ids(&self) -> Vec<String> {
        vec![self.name.clone()]
    }

    fn source(&self) -> LabelSource {
        LabelSource::SyntheticOracle
    }
}
