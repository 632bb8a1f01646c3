//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::metrics::{ConfusionCounts, MetricsReport};
use crate::learners::{LearnerError, LearnerSpec, Matrix, ProbabilisticClassifier};
use crate::model::Label;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error("{n} labeled instances is fewer than {folds} folds")]
    TooFew { n: usize, folds: usize },
    #[error("cross-validation needs both classes")]
    SingleClass,
    #[error("folds must be at least 2")]
    BadFolds,
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Fold index for each instance. Each class is shuffled and dealt
/// round-robin, continuing the count across classes so that fold sizes
/// differ by at most one.
pub fn stratified_folds(y: &[Label], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; y.len()];
    let mut pos = 0;
    for class in [Label::Untrusted, Label::Trusted] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assign[i] = pos % k;
            pos += 1;
        }
    }
    assign
}

/// Trains on k-1 folds, predicts the held-out one, and pools the
/// confusion counts over all k. Fold `f` trains with seed `spec.seed + f`.
pub fn evaluate_cv(x: &Matrix, y: &[Label], spec: &LearnerSpec, folds: usize, seed: u64) -> Result<MetricsReport, CvError> {
    if folds < 2 {
        return Err(CvError::BadFolds);
    }
    if y.len() < folds {
        return Err(CvError::TooFew { n: y.len(), folds });
    }
    if !y.contains(&Label::Trusted) || !y.contains(&Label::Untrusted) {
        return Err(CvError::SingleClass);
    }
    let assign = stratified_folds(y, folds, seed);
    let per_fold: Vec<Result<ConfusionCounts, LearnerError>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| assign[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| assign[i] == f).collect();
            let ty: Vec<Label> = train.iter().map(|&i| y[i]).collect();
            let model = spec.with_seed(spec.seed().wrapping_add(f as u64)).fit(&x.select_rows(&train), &ty)?;
            Ok(ConfusionCounts::from_pairs(test.iter().map(|&i| (y[i], model.predict(x.row(i))))))
        })
        .collect();
    let mut total = ConfusionCounts::default();
    for c in per_fold {
        total = total.merge(c?);
    }
    Ok(MetricsReport::from_confusion(total, folds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::testdata::blobs;
    use crate::learners::ForestParams;

    #[test]
    fn folds_are_stratified_and_balanced() {
        let y: Vec<Label> = (0..1000).map(|i| Label::from_index(usize::from(i < 582))).collect();
        let a = stratified_folds(&y, 10, 3);
        for f in 0..10 {
            let members: Vec<usize> = (0..y.len()).filter(|&i| a[i] == f).collect();
            assert_eq!(members.len(), 100);
            let pos = members.iter().filter(|&&i| y[i] == Label::Trusted).count();
            assert!((58..=59).contains(&pos));
        }
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let (x, y) = blobs(100, 12.0, 1);
        let spec = LearnerSpec::RandomForest(ForestParams { n_trees: 10, ..Default::default() });
        let m = evaluate_cv(&x, &y, &spec, 10, 0).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.f1_0, m.f1_1), (1.0, 1.0));
        assert_eq!(m.confusion.total(), 100);
    }

    #[test]
    fn errors() {
        let (x, y) = blobs(6, 4.0, 1);
        let spec = LearnerSpec::RandomForest(ForestParams::default());
        assert_eq!(evaluate_cv(&x, &y, &spec, 10, 0), Err(CvError::TooFew { n: 6, folds: 10 }));
        let same = vec![Label::Trusted; 6];
        assert_eq!(evaluate_cv(&x, &same, &spec, 3, 0), Err(CvError::SingleClass));
    }
}
