//! Domain types shared across the pipeline.
//!
//! Every numeric feature of a user lives on [`FeatureVector`]; the
//! [`Feature`] enum names those columns so that masks, normalization
//! parameters and correlation reports can address them uniformly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::MetricsReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("zero followers")]
    ZeroFollowers,
    #[error("zero friends")]
    ZeroFriends,
    #[error("private profile")]
    PrivateProfile,
    #[error("empty user id")]
    EmptyUserId,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(i64),
    #[error("round index {next} does not follow {last}")]
    RoundOrder { last: usize, next: usize },
}

/// Account-level counters for one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub followers: u64,
    pub friends: u64,
    pub statuses: u64,
    pub listed: u64,
    pub is_public: bool,
}

impl UserProfile {
    /// Builds a profile. With `selection_rule` on, private accounts and
    /// accounts without friends or followers are rejected, which is the
    /// cohort filter applied at ingest.
    pub fn new(
        user_id: impl Into<String>,
        followers: u64,
        friends: u64,
        statuses: u64,
        listed: u64,
        is_public: bool,
        selection_rule: bool,
    ) -> Result<Self, ModelError> {
        let profile = Self {
            user_id: user_id.into(),
            followers,
            friends,
            statuses,
            listed,
            is_public,
        };
        if profile.user_id.is_empty() {
            return Err(ModelError::EmptyUserId);
        }
        if selection_rule {
            profile.check_selection_rule()?;
        }
        Ok(profile)
    }

    pub fn check_selection_rule(&self) -> Result<(), ModelError> {
        if !self.is_public {
            return Err(ModelError::PrivateProfile);
        }
        if self.followers == 0 {
            return Err(ModelError::ZeroFollowers);
        }
        if self.friends == 0 {
            return Err(ModelError::ZeroFriends);
        }
        Ok(())
    }
}

/// One collected tweet with its engagement counters and entity flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: u64,
    pub user_id: String,
    pub retweet_count: u64,
    pub like_count: u64,
    pub has_url: bool,
    pub has_hashtag: bool,
    pub is_retweet_of_other: bool,
    pub text: String,
}

/// Named numeric columns of a [`FeatureVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Followers,
    Friends,
    Statuses,
    Listed,
    NRet,
    NLik,
    UrlCount,
    RRet,
    RLik,
    RUrl,
    RHas,
    ROri,
    SocialReputation,
    RetweetHindex,
    LikedHindex,
    SentimentScore,
    TweetCredibility,
    Influence,
    NPos,
    NNeu,
    NNeg,
}

impl Feature {
    pub const ALL: [Feature; 21] = [
        Feature::Followers,
        Feature::Friends,
        Feature::Statuses,
        Feature::Listed,
        Feature::NRet,
        Feature::NLik,
        Feature::UrlCount,
        Feature::RRet,
        Feature::RLik,
        Feature::RUrl,
        Feature::RHas,
        Feature::ROri,
        Feature::SocialReputation,
        Feature::RetweetHindex,
        Feature::LikedHindex,
        Feature::SentimentScore,
        Feature::TweetCredibility,
        Feature::Influence,
        Feature::NPos,
        Feature::NNeu,
        Feature::NNeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Followers => "followers",
            Feature::Friends => "friends",
            Feature::Statuses => "statuses",
            Feature::Listed => "listed",
            Feature::NRet => "n_ret",
            Feature::NLik => "n_lik",
            Feature::UrlCount => "url_count",
            Feature::RRet => "r_ret",
            Feature::RLik => "r_lik",
            Feature::RUrl => "r_url",
            Feature::RHas => "r_has",
            Feature::ROri => "r_ori",
            Feature::SocialReputation => "social_reputation",
            Feature::RetweetHindex => "retweet_hindex",
            Feature::LikedHindex => "liked_hindex",
            Feature::SentimentScore => "sentiment_score",
            Feature::TweetCredibility => "tweet_credibility",
            Feature::Influence => "influence",
            Feature::NPos => "n_pos",
            Feature::NNeu => "n_neu",
            Feature::NNeg => "n_neg",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| ModelError::UnknownFeature(s.to_string()))
    }
}

/// Derived per-user record. Counts are stored as `f64` so the same struct
/// can hold both the raw values and their min-max normalized images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: String,
    pub followers: f64,
    pub friends: f64,
    pub statuses: f64,
    pub listed: f64,
    /// Total retweets over the collected tweets.
    pub n_ret: f64,
    /// Total likes over the collected tweets.
    pub n_lik: f64,
    /// Collected tweets containing at least one URL.
    pub url_count: f64,
    pub r_ret: f64,
    pub r_lik: f64,
    pub r_url: f64,
    pub r_has: f64,
    pub r_ori: f64,
    pub social_reputation: f64,
    pub retweet_hindex: f64,
    pub liked_hindex: f64,
    pub sentiment_score: f64,
    pub tweet_credibility: f64,
    pub influence: f64,
    pub n_pos: f64,
    pub n_neu: f64,
    pub n_neg: f64,
    pub normalized: bool,
}

impl FeatureVector {
    /// All-zero vector for `user_id`.
    pub fn empty(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            followers: 0.0,
            friends: 0.0,
            statuses: 0.0,
            listed: 0.0,
            n_ret: 0.0,
            n_lik: 0.0,
            url_count: 0.0,
            r_ret: 0.0,
            r_lik: 0.0,
            r_url: 0.0,
            r_has: 0.0,
            r_ori: 0.0,
            social_reputation: 0.0,
            retweet_hindex: 0.0,
            liked_hindex: 0.0,
            sentiment_score: 0.0,
            tweet_credibility: 0.0,
            influence: 0.0,
            n_pos: 0.0,
            n_neu: 0.0,
            n_neg: 0.0,
            normalized: false,
        }
    }

    pub fn get(&self, feature: Feature) -> f64 {
        *self.slot(feature)
    }

    pub fn set(&mut self, feature: Feature, value: f64) {
        *self.slot_mut(feature) = value;
    }

    /// Values of `features`, in order; the classifier input row.
    pub fn select(&self, features: &[Feature]) -> Vec<f64> {
        features.iter().map(|&f| self.get(f)).collect()
    }

    fn slot(&self, feature: Feature) -> &f64 {
        match feature {
            Feature::Followers => &self.followers,
            Feature::Friends => &self.friends,
            Feature::Statuses => &self.statuses,
            Feature::Listed => &self.listed,
            Feature::NRet => &self.n_ret,
            Feature::NLik => &self.n_lik,
            Feature::UrlCount => &self.url_count,
            Feature::RRet => &self.r_ret,
            Feature::RLik => &self.r_lik,
            Feature::RUrl => &self.r_url,
            Feature::RHas => &self.r_has,
            Feature::ROri => &self.r_ori,
            Feature::SocialReputation => &self.social_reputation,
            Feature::RetweetHindex => &self.retweet_hindex,
            Feature::LikedHindex => &self.liked_hindex,
            Feature::SentimentScore => &self.sentiment_score,
            Feature::TweetCredibility => &self.tweet_credibility,
            Feature::Influence => &self.influence,
            Feature::NPos => &self.n_pos,
            Feature::NNeu => &self.n_neu,
            Feature::NNeg => &self.n_neg,
        }
    }

    fn slot_mut(&mut self, feature: Feature) -> &mut f64 {
        match feature {
            Feature::Followers => &mut self.followers,
            Feature::Friends => &mut self.friends,
            Feature::Statuses => &mut self.statuses,
            Feature::Listed => &mut self.listed,
            Feature::NRet => &mut self.n_ret,
            Feature::NLik => &mut self.n_lik,
            Feature::UrlCount => &mut self.url_count,
            Feature::RRet => &mut self.r_ret,
            Feature::RLik => &mut self.r_lik,
            Feature::RUrl => &mut self.r_url,
            Feature::RHas => &mut self.r_has,
            Feature::ROri => &mut self.r_ori,
            Feature::SocialReputation => &mut self.social_reputation,
            Feature::RetweetHindex => &mut self.retweet_hindex,
            Feature::LikedHindex => &mut self.liked_hindex,
            Feature::SentimentScore => &mut self.sentiment_score,
            Feature::TweetCredibility => &mut self.tweet_credibility,
            Feature::Influence => &mut self.influence,
            Feature::NPos => &mut self.n_pos,
            Feature::NNeu => &mut self.n_neu,
            Feature::NNeg => &mut self.n_neg,
        }
    }
}

/// Trust label. The numeric encoding is fixed: trusted = 1, untrusted = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Untrusted = 0,
    Trusted = 1,
}

impl Label {
    pub fn as_index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Trusted
        } else {
            Label::Untrusted
        }
    }

    pub fn as_f64(self) -> f64 {
        self as usize as f64
    }
}

impl TryFrom<i64> for Label {
    type Error = ModelError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Untrusted),
            1 => Ok(Label::Trusted),
            other => Err(ModelError::InvalidLabel(other)),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::try_from(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Seed,
    ActiveLoop,
    SyntheticOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub features: FeatureVector,
    pub label: Label,
    pub annotator_ids: Vec<String>,
    pub source: LabelSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    RandomForest,
    Svm,
    Mlp,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::RandomForest => "rf",
            LearnerKind::Svm => "svm",
            LearnerKind::Mlp => "mlp",
        }
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rf" | "random_forest" => Ok(LearnerKind::RandomForest),
            "svm" => Ok(LearnerKind::Svm),
            "mlp" => Ok(LearnerKind::Mlp),
            other => Err(format!("unknown learner `{other}` (expected rf, svm or mlp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub labeled_size: usize,
    pub metrics: MetricsReport,
}

/// A trained learner's bookkeeping: configuration plus evaluation history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub learner_kind: LearnerKind,
    pub hyperparameters: BTreeMap<String, String>,
    pub trained: bool,
    pub training_set_size: usize,
    pub history: Vec<RoundRecord>,
}

impl ModelState {
    pub fn new(learner_kind: LearnerKind, hyperparameters: BTreeMap<String, String>) -> Self {
        Self {
            learner_kind,
            hyperparameters,
            trained: false,
            training_set_size: 0,
            history: Vec::new(),
        }
    }

    /// Appends a round; round indexes must be strictly increasing.
    pub fn push_round(&mut self, record: RoundRecord) -> Result<(), ModelError> {
        if let Some(last) = self.history.last() {
            if record.round_index <= last.round_index {
                return Err(ModelError::RoundOrder {
                    last: last.round_index,
                    next: record.round_index,
                });
            }
        }
        self.history.push(record);
        Ok(())
    }
}
