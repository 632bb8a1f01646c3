//! Percentile clipping, min-max normalization, feature/target correlation
//! and the classifier feature mask.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Feature, FeatureVector, LabeledInstance, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("no records")]
    Empty,
    #[error("percentile {0} outside (50, 100]")]
    BadPercentile(f64),
    #[error("correlation needs at least two instances")]
    TooFew,
    #[error("correlation needs both classes present")]
    SingleClass,
    #[error(transparent)]
    Feature(#[from] ModelError),
}

pub const DEFAULT_PERCENTILE: f64 = 99.0;

/// Features with no natural upper bound; only these get percentile-clipped.
pub fn default_unbounded() -> BTreeSet<Feature> {
    [
        Feature::Followers,
        Feature::Friends,
        Feature::Statuses,
        Feature::Listed,
        Feature::NLik,
        Feature::NRet,
        Feature::RRet,
        Feature::RLik,
        Feature::SocialReputation,
        Feature::RetweetHindex,
        Feature::LikedHindex,
    ]
    .into_iter()
    .collect()
}

/// Percentile of sorted data by linear interpolation between closest ranks
/// (rank `h = (n - 1) * p / 100`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clip bounds and min/max for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnParams {
    pub clip_low: f64,
    pub clip_high: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnParams {
    /// Fits one column. With `clip` set, the bounds are the `100 - p` and
    /// `p` percentiles; otherwise the observed range.
    pub fn fit(values: &[f64], clip: Option<f64>) -> Result<Self, PreprocessError> {
        if values.is_empty() {
            return Err(PreprocessError::Empty);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (clip_low, clip_high) = match clip {
            Some(p) => (percentile_sorted(&sorted, 100.0 - p), percentile_sorted(&sorted, p)),
            None => (sorted[0], sorted[sorted.len() - 1]),
        };
        let min = sorted[0].clamp(clip_low, clip_high);
        let max = sorted[sorted.len() - 1].clamp(clip_low, clip_high);
        Ok(Self {
            clip_low,
            clip_high,
            min,
            max,
        })
    }

    /// Clamp to the clip bounds, then map `[min, max]` onto `[0, 1]`.
    /// A constant column maps to `0.0`.
    pub fn apply(&self, x: f64) -> f64 {
        if self.max <= self.min {
            return 0.0;
        }
        let clipped = x.clamp(self.clip_low, self.clip_high);
        ((clipped - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub percentile: f64,
    pub columns: BTreeMap<Feature, ColumnParams>,
}

fn check_percentile(p: f64) -> Result<(), PreprocessError> {
    if p > 50.0 && p <= 100.0 {
        Ok(())
    } else {
        Err(PreprocessError::BadPercentile(p))
    }
}

/// Fits clip bounds and min/max for every feature column.
pub fn fit(
    vectors: &[FeatureVector],
    percentile: f64,
    unbounded: &BTreeSet<Feature>,
) -> Result<NormalizationParams, PreprocessError> {
    check_percentile(percentile)?;
    if vectors.is_empty() {
        return Err(PreprocessError::Empty);
    }
    let mut columns = BTreeMap::new();
    for feature in Feature::ALL {
        let values: Vec<f64> = vectors.iter().map(|v| v.get(feature)).collect();
        let clip = unbounded.contains(&feature).then_some(percentile);
        columns.insert(feature, ColumnParams::fit(&values, clip)?);
    }
    Ok(NormalizationParams {
        percentile,
        columns,
    })
}

pub fn transform(vector: &FeatureVector, params: &NormalizationParams) -> FeatureVector {
    let mut out = vector.clone();
    for (&feature, col) in &params.columns {
        out.set(feature, col.apply(vector.get(feature)));
    }
    out.normalized = true;
    out
}

pub fn fit_transform(
    vectors: &[FeatureVector],
    percentile: f64,
    unbounded: &BTreeSet<Feature>,
) -> Result<(NormalizationParams, Vec<FeatureVector>), PreprocessError> {
    let params = fit(vectors, percentile, unbounded)?;
    let out = vectors.iter().map(|v| transform(v, &params)).collect();
    Ok((params, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: Feature,
    pub r: f64,
    /// Set when the column is constant and `r` is reported as zero.
    pub degenerate: bool,
}

/// Pearson correlation of `xs` against `ys`; `None` when either is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of each feature column with the 0/1 label.
pub fn correlation_report(
    labeled: &[LabeledInstance],
    features: &[Feature],
) -> Result<Vec<FeatureCorrelation>, PreprocessError> {
    if labeled.len() < 2 {
        return Err(PreprocessError::TooFew);
    }
    let ys: Vec<f64> = labeled.iter().map(|l| l.label.as_f64()).collect();
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(PreprocessError::SingleClass);
    }
    Ok(features
        .iter()
        .map(|&feature| {
            let xs: Vec<f64> = labeled.iter().map(|l| l.features.get(feature)).collect();
            match pearson(&xs, &ys) {
                Some(r) => FeatureCorrelation {
                    feature,
                    r,
                    degenerate: false,
                },
                None => FeatureCorrelation {
                    feature,
                    r: 0.0,
                    degenerate: true,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// The fifteen "potential" features: everything except the
    /// discriminatory status count, the evenly distributed URL features and
    /// the raw sentiment tallies.
    PaperDefault,
    All,
    Custom(Vec<String>),
}

impl std::str::FromStr for MaskMode {
    type Err = std::convert::Infallible;

    /// `paper_default`, `all`, or a comma-separated feature list.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "paper_default" | "default" => MaskMode::PaperDefault,
            "all" => MaskMode::All,
            list => MaskMode::Custom(
                list.split(',')
                    .map(|f| f.trim().to_string())
                    .filter(|f| !f.is_empty())
                    .collect(),
            ),
        })
    }
}

pub fn feature_mask(mode: &MaskMode) -> Result<Vec<Feature>, PreprocessError> {
    match mode {
        MaskMode::PaperDefault => Ok(vec![
            Feature::Followers,
            Feature::Listed,
            Feature::Friends,
            Feature::SocialReputation,
            Feature::TweetCredibility,
            Feature::Influence,
            Feature::RetweetHindex,
            Feature::ROri,
            Feature::RHas,
            Feature::LikedHindex,
            Feature::RLik,
            Feature::SentimentScore,
            Feature::NLik,
            Feature::NRet,
            Feature::RRet,
        ]),
        MaskMode::All => Ok(Feature::ALL.to_vec()),
        MaskMode::Custom(names) => names
            .iter()
            .map(|n| n.parse::<Feature>().map_err(PreprocessError::from))
            .collect(),
    }
}
