//! Service configuration: defaults, then a TOML or JSON file, then
//! `TRUSTLENS_*` environment variables. Nested keys use a double
//! underscore, e.g. `TRUSTLENS_STOP__MAX_ROUNDS=20`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use trustlens::active::{StopRule, Strategy, DEFAULT_BATCH};
use trustlens::preprocess::DEFAULT_PERCENTILE;
use trustlens::sentiment::DEFAULT_DEAD_ZONE;
use trustlens::synth::CohortConfig;
use trustlens::{LearnerKind, LearnerSpec};

pub const ENV_PREFIX: &str = "TRUSTLENS_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported config format `{0}` (use .toml or .json)")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Where the users come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// A directory written by `trustlens ingest`, plus a seed-label table
    /// (CSV or JSONL with `user_id` and `label`).
    Directory { dir: PathBuf, seed_labels: PathBuf },
    /// A generated cohort whose seed set is drawn from the known labels.
    Synthetic {
        #[serde(default)]
        cohort: CohortConfig,
        seed_trusted: usize,
        seed_untrusted: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub dataset: DatasetSource,
    /// Label log and snapshots; without it the session lives in memory.
    pub state_dir: Option<PathBuf>,
    /// Built UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Sentiment lexicon; the bundled one when unset.
    pub lexicon: Option<PathBuf>,
    pub learner: LearnerSpec,
    pub strategy: Strategy,
    pub batch_size: usize,
    pub folds: usize,
    /// `paper_default`, `all` or a comma-separated feature list.
    pub features: String,
    pub clip_percentile: f64,
    pub dead_zone: f64,
    pub cv_seed: u64,
    pub selection_seed: u64,
    pub stop: StopRule,
    /// Matching votes needed before a label is accepted.
    pub annotators_required: usize,
    pub train_on_start: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            dataset: DatasetSource::Synthetic {
                cohort: CohortConfig {
                    n_users: 2000,
                    ..Default::default()
                },
                seed_trusted: 582,
                seed_untrusted: 418,
            },
            state_dir: None,
            static_dir: None,
            lexicon: None,
            learner: LearnerSpec::default_for(LearnerKind::RandomForest),
            strategy: Strategy::Margin,
            batch_size: DEFAULT_BATCH,
            folds: 10,
            features: "paper_default".into(),
            clip_percentile: DEFAULT_PERCENTILE,
            dead_zone: DEFAULT_DEAD_ZONE,
            cv_seed: 0,
            selection_seed: 0,
            stop: StopRule::default(),
            annotators_required: 2,
            train_on_start: true,
        }
    }
}

impl ServiceConfig {
    /// Defaults, overlaid by `path` if given, overlaid by the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(Self::default()).expect("defaults serialize");
        if let Some(path) = path {
            merge(&mut value, read_file(path)?);
        }
        for (key, raw) in env {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            let keys: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
            set_path(&mut value, &keys, parsed);
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be at least 1".into()));
        }
        if self.annotators_required == 0 {
            return Err(ConfigError::Invalid("annotators_required must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(ConfigError::Invalid("folds must be at least 2".into()));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |message: String| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| parse_err(e.to_string())),
        Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string())),
        other => Err(ConfigError::Format(other.unwrap_or("").to_string())),
    }
}

/// Recursive object merge. An object carrying a different `kind` than the
/// one it overlays replaces it wholesale.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let kind_changed = o.get("kind").is_some_and(|k| b.get("kind") != Some(k));
            if kind_changed {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(value: &mut Value, keys: &[String], leaf: Value) {
    let Some((first, rest)) = keys.split_first() else {
        *value = leaf;
        return;
    };
    if !value.is_object() {
        *value = Value::Object(Map::new());
    }
    let obj = value.as_object_mut().expect("object");
    let slot = obj.entry(first.clone()).or_insert(Value::Null);
    set_path(slot, rest, leaf);
}
