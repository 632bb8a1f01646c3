//! Per-user engagement ratios computed from a user's collected tweets.
//!
//! Numerators always sum over the collected tweets. The denominator is the
//! account's lifetime status count by default, or the number of collected
//! tweets with [`Denominator::Collected`]. Retweet and like ratios are
//! therefore unbounded above before normalization.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{TweetRecord, UserProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("inactive user: status count is zero")]
    InactiveUser,
    #[error("{count} collected tweets flagged but denominator is only {denominator}")]
    DenominatorTooSmall { count: u64, denominator: u64 },
    #[error("user has no friends; follower/following ratio undefined")]
    NoFriends,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    #[default]
    Statuses,
    Collected,
}

impl Denominator {
    pub fn resolve(self, profile: &UserProfile, tweets: &[TweetRecord]) -> u64 {
        match self {
            Denominator::Statuses => profile.statuses,
            Denominator::Collected => tweets.len() as u64,
        }
    }
}

impl FromStr for Denominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "statuses" => Ok(Denominator::Statuses),
            "collected" => Ok(Denominator::Collected),
            other => Err(format!("unknown denominator `{other}`")),
        }
    }
}

fn nonzero(n_t: u64) -> Result<f64, FeatureError> {
    if n_t == 0 {
        Err(FeatureError::InactiveUser)
    } else {
        Ok(n_t as f64)
    }
}

fn flagged_share(
    tweets: &[TweetRecord],
    n_t: u64,
    flag: impl Fn(&TweetRecord) -> bool,
) -> Result<f64, FeatureError> {
    let denom = nonzero(n_t)?;
    let count = tweets.iter().filter(|t| flag(t)).count() as u64;
    if count > n_t {
        return Err(FeatureError::DenominatorTooSmall {
            count,
            denominator: n_t,
        });
    }
    Ok(count as f64 / denom)
}

pub fn total_retweets(tweets: &[TweetRecord]) -> u64 {
    tweets.iter().map(|t| t.retweet_count).sum()
}

pub fn total_likes(tweets: &[TweetRecord]) -> u64 {
    tweets.iter().map(|t| t.like_count).sum()
}

pub fn url_count(tweets: &[TweetRecord]) -> u64 {
    tweets.iter().filter(|t| t.has_url).count() as u64
}

/// Retweets received per status.
pub fn retweet_ratio(tweets: &[TweetRecord], n_t: u64) -> Result<f64, FeatureError> {
    Ok(total_retweets(tweets) as f64 / nonzero(n_t)?)
}

/// Likes received per status.
pub fn liked_ratio(tweets: &[TweetRecord], n_t: u64) -> Result<f64, FeatureError> {
    Ok(total_likes(tweets) as f64 / nonzero(n_t)?)
}

pub fn url_ratio(tweets: &[TweetRecord], n_t: u64) -> Result<f64, FeatureError> {
    flagged_share(tweets, n_t, |t| t.has_url)
}

pub fn hashtag_ratio(tweets: &[TweetRecord], n_t: u64) -> Result<f64, FeatureError> {
    flagged_share(tweets, n_t, |t| t.has_hashtag)
}

/// Share of statuses that are not retweets of someone else, clamped to `[0, 1]`.
pub fn original_content_ratio(tweets: &[TweetRecord], n_t: u64) -> Result<f64, FeatureError> {
    let denom = nonzero(n_t)?;
    let retweets = tweets.iter().filter(|t| t.is_retweet_of_other).count() as f64;
    Ok(((denom - retweets) / denom).clamp(0.0, 1.0))
}

/// Followers over friends. Diagnostic only; not a classifier input.
pub fn follower_following_ratio(profile: &UserProfile) -> Result<f64, FeatureError> {
    if profile.friends == 0 {
        return Err(FeatureError::NoFriends);
    }
    Ok(profile.followers as f64 / profile.friends as f64)
}

/// The five ratios for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub r_ret: f64,
    pub r_lik: f64,
    pub r_url: f64,
    pub r_has: f64,
    pub r_ori: f64,
}

pub fn ratios(tweets: &[TweetRecord], n_t: u64) -> Result<Ratios, FeatureError> {
    Ok(Ratios {
        r_ret: retweet_ratio(tweets, n_t)?,
        r_lik: liked_ratio(tweets, n_t)?,
        r_url: url_ratio(tweets, n_t)?,
        r_has: hashtag_ratio(tweets, n_t)?,
        r_ori: original_content_ratio(tweets, n_t)?,
    })
}
