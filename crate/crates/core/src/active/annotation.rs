//! Multi-annotator label collection.
//!
//! An item is settled once `required` annotators have voted and all agree.
//! Any disagreement moves the item to the conflict queue, where it waits
//! for an explicit adjudication instead of a majority guess.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("user {0} has no open conflict")]
    NoConflict(String),
    #[error("at least one annotation is required per item")]
    ZeroRequired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Submission {
    Pending { votes: usize },
    Agreed { label: Label, annotator_ids: Vec<String> },
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictItem {
    pub user_id: String,
    pub votes: BTreeMap<String, Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBook {
    required: usize,
    pending: BTreeMap<String, BTreeMap<String, Label>>,
    conflicts: BTreeMap<String, BTreeMap<String, Label>>,
}

impl AnnotationBook {
    pub fn new(required: usize) -> Result<Self, AnnotationError> {
        if required == 0 {
            return Err(AnnotationError::ZeroRequired);
        }
        Ok(Self {
            required,
            pending: BTreeMap::new(),
            conflicts: BTreeMap::new(),
        })
    }

    pub fn required(&self) -> usize {
        self.required
    }

    /// Records a vote. A repeated vote by the same annotator replaces the
    /// earlier one, so resubmitting is idempotent.
    pub fn submit(&mut self, user_id: &str, annotator_id: &str, label: Label) -> Submission {
        if let Some(votes) = self.conflicts.get_mut(user_id) {
            votes.insert(annotator_id.to_string(), label);
            return Submission::Conflict;
        }
        let votes = self.pending.entry(user_id.to_string()).or_default();
        votes.insert(annotator_id.to_string(), label);
        if votes.len() < self.required {
            return Submission::Pending { votes: votes.len() };
        }
        let votes = self.pending.remove(user_id).expect("present");
        let first = *votes.values().next().expect("non-empty");
        if votes.values().all(|l| *l == first) {
            Submission::Agreed {
                label: first,
                annotator_ids: votes.into_keys().collect(),
            }
        } else {
            self.conflicts.insert(user_id.to_string(), votes);
            Submission::Conflict
        }
    }

    /// Settles a conflict with a final label; the adjudicator is appended
    /// to the annotator list.
    pub fn adjudicate(&mut self, user_id: &str, label: Label, adjudicator: &str) -> Result<Submission, AnnotationError> {
        let votes = self
            .conflicts
            .remove(user_id)
            .ok_or_else(|| AnnotationError::NoConflict(user_id.to_string()))?;
        let mut ids: Vec<String> = votes.into_keys().collect();
        if !ids.iter().any(|a| a == adjudicator) {
            ids.push(adjudicator.to_string());
        }
        Ok(Submission::Agreed {
            label,
            annotator_ids: ids,
        })
    }

    pub fn conflicts(&self) -> Vec<ConflictItem> {
        self.conflicts
            .iter()
            .map(|(u, v)| ConflictItem {
                user_id: u.clone(),
                votes: v.clone(),
            })
            .collect()
    }

    pub fn has_conflict(&self, user_id: &str) -> bool {
        self.conflicts.contains_key(user_id)
    }

    pub fn votes_for(&self, user_id: &str) -> usize {
        self.pending.get(user_id).map_or(0, BTreeMap::len)
    }

    /// Forgets everything about `user_id`, e.g. once it left the batch.
    pub fn clear(&mut self, user_id: &str) {
        self.pending.remove(user_id);
        self.conflicts.remove(user_id);
    }
}
