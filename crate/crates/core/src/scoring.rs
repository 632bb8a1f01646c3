//! Derived scores and the per-user influence pipeline.
//!
//! Influence is the mean of five components: sentiment score, tweet
//! credibility, social reputation and the two h-indexes. Social reputation
//! and the h-indexes have no upper bound, so every component is first
//! min-max normalized across the dataset and only then averaged. Influence
//! is consequently dataset-relative and always lies in `[0, 1]`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, Denominator, FeatureError};
use crate::model::{Feature, FeatureVector, TweetRecord, UserProfile};
use crate::preprocess::{self, ColumnParams, PreprocessError};
use crate::sentiment::{Lexicon, SentimentCounts, DEFAULT_DEAD_ZONE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("no analyzed tweets")]
    NoAnalyzedTweets,
    #[error("unnormalized component {name} = {value}")]
    UnnormalizedComponent { name: &'static str, value: f64 },
    #[error("no records")]
    NoRecords,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Largest `h` such that at least `h` of the counts are `>= h`.
pub fn h_index(counts: &[u64]) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .enumerate()
        .take_while(|&(i, &c)| c > i as u64)
        .count() as u64
}

/// `2 log10(1 + followers) + log10(1 + statuses) - log10(1 + friends)`.
pub fn social_reputation(followers: u64, statuses: u64, friends: u64) -> f64 {
    2.0 * (1.0 + followers as f64).log10() + (1.0 + statuses as f64).log10()
        - (1.0 + friends as f64).log10()
}

/// Share of analyzed tweets that are not negative.
pub fn sentiment_score(n_pos: u64, n_neu: u64, n_neg: u64) -> Result<f64, ScoringError> {
    let non_negative = n_pos + n_neu;
    let total = non_negative + n_neg;
    if total == 0 {
        return Err(ScoringError::NoAnalyzedTweets);
    }
    Ok(non_negative as f64 / total as f64)
}

/// Mean of the four engagement ratios, scaled by the original-content ratio.
pub fn tweet_credibility(r_ret: f64, r_lik: f64, r_has: f64, r_url: f64, r_ori: f64) -> f64 {
    (r_ret + r_lik + r_has + r_url) / 4.0 * r_ori
}

/// The five influence components after dataset-level normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceComponents {
    pub sentiment_score: f64,
    pub tweet_credibility: f64,
    pub social_reputation: f64,
    pub retweet_hindex: f64,
    pub liked_hindex: f64,
}

impl InfluenceComponents {
    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("sentiment_score", self.sentiment_score),
            ("tweet_credibility", self.tweet_credibility),
            ("social_reputation", self.social_reputation),
            ("retweet_hindex", self.retweet_hindex),
            ("liked_hindex", self.liked_hindex),
        ]
    }
}

/// Arithmetic mean of five components, each of which must lie in `[0, 1]`.
pub fn influence_score(c: &InfluenceComponents) -> Result<f64, ScoringError> {
    let mut sum = 0.0;
    for (name, value) in c.named() {
        if !(0.0..=1.0).contains(&value) {
            return Err(ScoringError::UnnormalizedComponent { name, value });
        }
        sum += value;
    }
    Ok(sum / 5.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub denominator: Denominator,
    pub dead_zone: f64,
    /// Clip percentile applied to the unbounded influence components.
    pub clip_percentile: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            denominator: Denominator::Statuses,
            dead_zone: DEFAULT_DEAD_ZONE,
            clip_percentile: preprocess::DEFAULT_PERCENTILE,
        }
    }
}

const COMPONENTS: [Feature; 5] = [
    Feature::SentimentScore,
    Feature::TweetCredibility,
    Feature::SocialReputation,
    Feature::RetweetHindex,
    Feature::LikedHindex,
];

/// Dataset-level normalization of the influence components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceContext {
    pub columns: Vec<(Feature, ColumnParams)>,
}

impl InfluenceContext {
    pub fn fit(raw: &[FeatureVector], clip_percentile: f64) -> Result<Self, ScoringError> {
        if raw.is_empty() {
            return Err(ScoringError::NoRecords);
        }
        let unbounded = preprocess::default_unbounded();
        let mut columns = Vec::with_capacity(COMPONENTS.len());
        for feature in COMPONENTS {
            let values: Vec<f64> = raw.iter().map(|v| v.get(feature)).collect();
            let clip = unbounded.contains(&feature).then_some(clip_percentile);
            columns.push((feature, ColumnParams::fit(&values, clip)?));
        }
        Ok(Self { columns })
    }

    pub fn components(&self, raw: &FeatureVector) -> InfluenceComponents {
        let norm = |f: Feature| {
            self.columns
                .iter()
                .find(|(c, _)| *c == f)
                .map(|(_, p)| p.apply(raw.get(f)))
                .unwrap_or(0.0)
        };
        InfluenceComponents {
            sentiment_score: norm(Feature::SentimentScore),
            tweet_credibility: norm(Feature::TweetCredibility),
            social_reputation: norm(Feature::SocialReputation),
            retweet_hindex: norm(Feature::RetweetHindex),
            liked_hindex: norm(Feature::LikedHindex),
        }
    }
}

/// First pass: everything except influence, which is left at zero.
pub fn raw_features(
    profile: &UserProfile,
    tweets: &[TweetRecord],
    lexicon: &Lexicon,
    config: &ScoringConfig,
) -> Result<FeatureVector, ScoringError> {
    let n_t = config.denominator.resolve(profile, tweets);
    let ratios = features::ratios(tweets, n_t)?;
    let retweets: Vec<u64> = tweets.iter().map(|t| t.retweet_count).collect();
    let likes: Vec<u64> = tweets.iter().map(|t| t.like_count).collect();
    let counts = SentimentCounts::tally(tweets.iter().map(|t| t.text.as_str()), lexicon, config.dead_zone);

    let mut v = FeatureVector::empty(profile.user_id.clone());
    v.followers = profile.followers as f64;
    v.friends = profile.friends as f64;
    v.statuses = profile.statuses as f64;
    v.listed = profile.listed as f64;
    v.n_ret = features::total_retweets(tweets) as f64;
    v.n_lik = features::total_likes(tweets) as f64;
    v.url_count = features::url_count(tweets) as f64;
    v.r_ret = ratios.r_ret;
    v.r_lik = ratios.r_lik;
    v.r_url = ratios.r_url;
    v.r_has = ratios.r_has;
    v.r_ori = ratios.r_ori;
    v.retweet_hindex = h_index(&retweets) as f64;
    v.liked_hindex = h_index(&likes) as f64;
    v.social_reputation = social_reputation(profile.followers, profile.statuses, profile.friends);
    v.n_pos = counts.positive as f64;
    v.n_neu = counts.neutral as f64;
    v.n_neg = counts.negative as f64;
    v.sentiment_score = sentiment_score(counts.positive, counts.neutral, counts.negative)?;
    v.tweet_credibility = tweet_credibility(v.r_ret, v.r_lik, v.r_has, v.r_url, v.r_ori);
    Ok(v)
}

/// Scores one user against an already fitted dataset context.
pub fn score_user(
    profile: &UserProfile,
    tweets: &[TweetRecord],
    lexicon: &Lexicon,
    config: &ScoringConfig,
    context: &InfluenceContext,
) -> Result<FeatureVector, ScoringError> {
    let mut v = raw_features(profile, tweets, lexicon, config)?;
    v.influence = influence_score(&context.components(&v))?;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReject {
    pub user_id: String,
    pub reason: String,
}

/// Recorded alongside scored output so consumers know how influence was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringMetadata {
    pub influence_normalization: String,
    pub config: ScoringConfig,
    pub lexicon_version: String,
    pub context: InfluenceContext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    pub vectors: Vec<FeatureVector>,
    pub rejects: Vec<ScoreReject>,
    pub metadata: ScoringMetadata,
}

/// Groups tweets by user id.
pub fn tweets_by_user(tweets: &[TweetRecord]) -> HashMap<&str, Vec<TweetRecord>> {
    let mut map: HashMap<&str, Vec<TweetRecord>> = HashMap::new();
    for t in tweets {
        map.entry(t.user_id.as_str()).or_default().push(t.clone());
    }
    map
}

/// Two-pass scoring: raw features per user, fit the influence context over
/// the cohort, then compute influence. Users whose features cannot be
/// computed are reported as rejects.
pub fn score_dataset(
    profiles: &[UserProfile],
    tweets: &[TweetRecord],
    lexicon: &Lexicon,
    config: &ScoringConfig,
) -> Result<ScoredDataset, ScoringError> {
    if profiles.is_empty() {
        return Err(ScoringError::NoRecords);
    }
    let by_user = tweets_by_user(tweets);
    let empty = Vec::new();
    let results: Vec<Result<FeatureVector, ScoreReject>> = profiles
        .par_iter()
        .map(|p| {
            let own = by_user.get(p.user_id.as_str()).unwrap_or(&empty);
            raw_features(p, own, lexicon, config).map_err(|e| ScoreReject {
                user_id: p.user_id.clone(),
                reason: e.to_string(),
            })
        })
        .collect();
    let mut vectors = Vec::with_capacity(results.len());
    let mut rejects = Vec::new();
    for r in results {
        match r {
            Ok(v) => vectors.push(v),
            Err(e) => rejects.push(e),
        }
    }
    if vectors.is_empty() {
        return Err(ScoringError::NoRecords);
    }
    let context = InfluenceContext::fit(&vectors, config.clip_percentile)?;
    vectors.par_iter_mut().try_for_each(|v| {
        v.influence = influence_score(&context.components(v))?;
        Ok::<_, ScoringError>(())
    })?;
    Ok(ScoredDataset {
        vectors,
        rejects,
        metadata: ScoringMetadata {
            influence_normalization: "components_min_max_normalized_before_mean".into(),
            config: *config,
            lexicon_version: lexicon.version().to_string(),
            context,
        },
    })
}
