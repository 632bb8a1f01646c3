//! Binary classifiers with calibrated class probabilities.
//!
//! All three learners take a row-major [`Matrix`] of normalized features and
//! 0/1 labels and implement [`ProbabilisticClassifier`]. Training is
//! deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label, LearnerKind};

pub mod forest;
pub mod mlp;
pub mod svm;

pub use forest::{ForestParams, RandomForest};
pub use mlp::{Activation, Mlp, MlpParams};
pub use svm::{Kernel, Svm, SvmParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("degenerate training set")]
    DegenerateTrainingSet,
    #[error("{rows} rows but {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("did not converge after {iterations} iterations (duality gap {gap})")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("diverged; lower lr")]
    Diverged,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LearnerError> {
        if data.len() != rows * cols {
            return Err(LearnerError::FeatureCount {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LearnerError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LearnerError::FeatureCount {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Class-probability contract shared by every learner.
pub trait ProbabilisticClassifier {
    /// `[p(untrusted), p(trusted)]`, summing to 1.
    fn predict_proba(&self, x: &[f64]) -> [f64; 2];

    fn predict(&self, x: &[f64]) -> Label {
        argmax(self.predict_proba(x))
    }

    fn predict_proba_all(&self, x: &Matrix) -> Vec<[f64; 2]> {
        x.iter_rows().map(|r| self.predict_proba(r)).collect()
    }
}

/// Index of the larger probability; ties go to class 0.
pub fn argmax(p: [f64; 2]) -> Label {
    if p[1] > p[0] {
        Label::Trusted
    } else {
        Label::Untrusted
    }
}

/// Validates shapes and returns the class counts `[n0, n1]`.
pub(crate) fn check_training(x: &Matrix, y: &[Label]) -> Result<[usize; 2], LearnerError> {
    if x.rows() != y.len() {
        return Err(LearnerError::ShapeMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    let mut counts = [0usize; 2];
    for l in y {
        counts[l.as_index()] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(LearnerError::DegenerateTrainingSet);
    }
    Ok(counts)
}

/// Which learner to train and with what hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    RandomForest(ForestParams),
    Svm(SvmParams),
    Mlp(MlpParams),
}

impl LearnerSpec {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::RandomForest => LearnerSpec::RandomForest(ForestParams::default()),
            LearnerKind::Svm => LearnerSpec::Svm(SvmParams::default()),
            LearnerKind::Mlp => LearnerSpec::Mlp(MlpParams::default()),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::RandomForest(_) => LearnerKind::RandomForest,
            LearnerSpec::Svm(_) => LearnerKind::Svm,
            LearnerSpec::Mlp(_) => LearnerKind::Mlp,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            LearnerSpec::RandomForest(p) => p.seed,
            LearnerSpec::Svm(p) => p.seed,
            LearnerSpec::Mlp(p) => p.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            LearnerSpec::RandomForest(p) => p.seed = seed,
            LearnerSpec::Svm(p) => p.seed = seed,
            LearnerSpec::Mlp(p) => p.seed = seed,
        }
        out
    }

    /// Flat string view of the parameters, as recorded on a `ModelState`.
    pub fn hyperparameters(&self) -> BTreeMap<String, String> {
        let value = serde_json::to_value(self).unwrap_or_default();
        value
            .as_object()
            .into_iter()
            .flatten()
            .filter(|(k, _)| k.as_str() != "kind")
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect()
    }

    pub fn fit(&self, x: &Matrix, y: &[Label]) -> Result<Model, LearnerError> {
        Ok(match self {
            LearnerSpec::RandomForest(p) => Model::RandomForest(forest::train_random_forest(x, y, p)?),
            LearnerSpec::Svm(p) => Model::Svm(svm::train_svm(x, y, p)?),
            LearnerSpec::Mlp(p) => Model::Mlp(mlp::train_mlp(x, y, p)?),
        })
    }
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    RandomForest(RandomForest),
    Svm(Svm),
    Mlp(Mlp),
}

impl ProbabilisticClassifier for Model {
    fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        match self {
            Model::RandomForest(m) => m.predict_proba(x),
            Model::Svm(m) => m.predict_proba(x),
            Model::Mlp(m) => m.predict_proba(x),
        }
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// On-disk form of a trained model together with the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub format_version: u32,
    pub features: Vec<crate::model::Feature>,
    pub spec: LearnerSpec,
    pub model: Model,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ModelSnapshot {
    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let snap: Self = serde_json::from_slice(&fs::read(path)?)?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(snap.format_version));
        }
        Ok(snap)
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Two isotropic Gaussian blobs `sep` standard deviations apart.
    pub fn blobs(n: usize, sep: f64, seed: u64) -> (Matrix, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = Label::from_index(i % 2);
            let c = if label == Label::Trusted { sep / 2.0 } else { -sep / 2.0 };
            rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            y.push(label);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    pub fn xor() -> (Matrix, Vec<Label>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = vec![Label::Untrusted, Label::Untrusted, Label::Trusted, Label::Trusted];
        (x, y)
    }

    pub fn accuracy(m: &impl ProbabilisticClassifier, x: &Matrix, y: &[Label]) -> f64 {
        let hits = x.iter_rows().zip(y).filter(|(r, l)| m.predict(r) == **l).count();
        hits as f64 / y.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_shapes() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.select_rows(&[2, 0]).row(0), &[5.0, 6.0]);
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn argmax_ties_to_zero() {
        assert_eq!(argmax([0.5, 0.5]), Label::Untrusted);
        assert_eq!(argmax([0.4, 0.6]), Label::Trusted);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let y = [Label::Trusted, Label::Trusted];
        for kind in [LearnerKind::RandomForest, LearnerKind::Svm, LearnerKind::Mlp] {
            let err = LearnerSpec::default_for(kind).fit(&x, &y).unwrap_err();
            assert_eq!(err.to_string(), "degenerate training set");
        }
    }

    #[test]
    fn hyperparameters_are_flattened() {
        let hp = LearnerSpec::default_for(LearnerKind::RandomForest).hyperparameters();
        assert_eq!(hp.get("n_trees").map(String::as_str), Some("100"));
        assert!(!hp.contains_key("kind"));
    }

    #[test]
    fn snapshot_round_trip() {
        let (x, y) = testdata::blobs(40, 6.0, 1);
        let dir = tempfile::tempdir().unwrap();
        for kind in [LearnerKind::RandomForest, LearnerKind::Svm, LearnerKind::Mlp] {
            let spec = LearnerSpec::default_for(kind);
            let snap = ModelSnapshot {
                format_version: SNAPSHOT_VERSION,
                features: vec![],
                model: spec.fit(&x, &y).unwrap(),
                spec,
            };
            let path = dir.path().join(format!("{}.json", kind.name()));
            snap.save(&path).unwrap();
            let back = ModelSnapshot::load(&path).unwrap();
            assert_eq!(back, snap);
            for r in x.iter_rows() {
                assert_eq!(back.model.predict_proba(r), snap.model.predict_proba(r));
            }
        }
    }
}
