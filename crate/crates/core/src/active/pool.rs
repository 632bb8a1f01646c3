use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeatureVector, Label, LabelSource, LabeledInstance};

pub const DEFAULT_BATCH: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("user {0} is both labeled and unlabeled")]
    Overlap(String),
    #[error("duplicate user {0}")]
    Duplicate(String),
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("user {0} is not in the unlabeled pool")]
    NotInPool(String),
}

/// Labeled and unlabeled instances, disjoint by user id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    labeled: Vec<LabeledInstance>,
    unlabeled: Vec<FeatureVector>,
    batch_size: usize,
}

impl Pool {
    pub fn new(labeled: Vec<LabeledInstance>, unlabeled: Vec<FeatureVector>, batch_size: usize) -> Result<Self, PoolError> {
        if batch_size == 0 {
            return Err(PoolError::ZeroBatch);
        }
        let mut seen = HashSet::new();
        for l in &labeled {
            if !seen.insert(l.features.user_id.as_str()) {
                return Err(PoolError::Duplicate(l.features.user_id.clone()));
            }
        }
        let labeled_ids = seen.clone();
        for u in &unlabeled {
            if labeled_ids.contains(u.user_id.as_str()) {
                return Err(PoolError::Overlap(u.user_id.clone()));
            }
            if !seen.insert(u.user_id.as_str()) {
                return Err(PoolError::Duplicate(u.user_id.clone()));
            }
        }
        Ok(Self {
            labeled,
            unlabeled,
            batch_size,
        })
    }

    pub fn labeled(&self) -> &[LabeledInstance] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[FeatureVector] {
        &self.unlabeled
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn find_unlabeled(&self, user_id: &str) -> Option<&FeatureVector> {
        self.unlabeled.iter().find(|v| v.user_id == user_id)
    }

    pub fn find_labeled(&self, user_id: &str) -> Option<&LabeledInstance> {
        self.labeled.iter().find(|l| l.features.user_id == user_id)
    }

    /// Moves one instance from the unlabeled to the labeled side.
    pub fn label(
        &mut self,
        user_id: &str,
        label: Label,
        annotator_ids: Vec<String>,
        source: LabelSource,
    ) -> Result<(), PoolError> {
        let pos = self
            .unlabeled
            .iter()
            .position(|v| v.user_id == user_id)
            .ok_or_else(|| PoolError::NotInPool(user_id.to_string()))?;
        let features = self.unlabeled.remove(pos);
        self.labeled.push(LabeledInstance {
            features,
            label,
            annotator_ids,
            source,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, label: Label) -> LabeledInstance {
        LabeledInstance {
            features: FeatureVector::empty(id),
            label,
            annotator_ids: vec![],
            source: LabelSource::Seed,
        }
    }

    #[test]
    fn rejects_overlap_and_zero_batch() {
        let l = vec![inst("a", Label::Trusted)];
        assert_eq!(
            Pool::new(l.clone(), vec![FeatureVector::empty("a")], 1),
            Err(PoolError::Overlap("a".into()))
        );
        assert_eq!(Pool::new(l, vec![], 0), Err(PoolError::ZeroBatch));
    }

    #[test]
    fn labeling_moves_instance() {
        let mut p = Pool::new(vec![inst("a", Label::Trusted)], vec![FeatureVector::empty("b")], 1).unwrap();
        p.label("b", Label::Untrusted, vec!["x".into()], LabelSource::ActiveLoop).unwrap();
        assert!(p.unlabeled().is_empty());
        assert_eq!(p.labeled().len(), 2);
        assert_eq!(
            p.label("b", Label::Untrusted, vec![], LabelSource::ActiveLoop),
            Err(PoolError::NotInPool("b".into()))
        );
    }
}
