//! File plumbing shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use trustlens::ingest::{self, IngestError};
use trustlens::preprocess::{self, MaskMode};
use trustlens::scoring::{self, ScoredDataset, ScoringConfig};
use trustlens::{Feature, FeatureVector, LearnerSpec, Lexicon};

use crate::args::{LearnerFlags, ScoringFlags};

/// Bad input or parameters; the process exits with status 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct Invalid(pub String);

pub fn invalid(e: impl std::fmt::Display) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

/// I/O failures keep their own exit status; everything else an ingest
/// function reports is a problem with the input.
pub fn ingest_error(e: IngestError) -> anyhow::Error {
    match e {
        IngestError::Io { .. } => e.into(),
        other => invalid(other),
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| invalid(format!("{}: line {}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// `features.jsonl` → `features.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// TOML or JSON, by extension.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display()))),
        Some("json") => serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display()))),
        _ => Err(invalid(format!("{}: use a .toml or .json file", path.display()))),
    }
}

/// Writes CSV through `write` into `out`, or to stdout.
pub fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            ensure_parent(path)?;
            let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write(&mut file)?;
            file.flush()?;
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

pub fn lexicon(path: Option<&Path>) -> Result<Lexicon> {
    match path {
        Some(p) => Lexicon::load(p).map_err(invalid),
        None => Ok(Lexicon::bundled()),
    }
}

pub fn scoring_config(flags: &ScoringFlags) -> ScoringConfig {
    ScoringConfig {
        denominator: flags.denominator,
        dead_zone: flags.dead_zone,
        clip_percentile: flags.clip_percentile,
    }
}

/// Loads a dataset directory and scores it.
pub fn score_dir(dir: &Path, flags: &ScoringFlags) -> Result<ScoredDataset> {
    let data = ingest::load_dataset(dir).map_err(ingest_error)?;
    if data.users.is_empty() {
        return Err(invalid("no records"));
    }
    let lex = lexicon(flags.lexicon.as_deref())?;
    scoring::score_dataset(&data.users, &data.tweets, &lex, &scoring_config(flags)).map_err(invalid)
}

/// Scores and normalizes a dataset directory.
pub fn normalized_dir(dir: &Path, flags: &ScoringFlags) -> Result<Vec<FeatureVector>> {
    let scored = score_dir(dir, flags)?;
    let (_, normalized) = preprocess::fit_transform(&scored.vectors, flags.clip_percentile, &preprocess::default_unbounded())
        .map_err(invalid)?;
    Ok(normalized)
}

pub fn learner_spec(flags: &LearnerFlags) -> Result<LearnerSpec> {
    let spec = match &flags.learner_config {
        Some(path) => read_config(path)?,
        None => LearnerSpec::default_for(flags.learner),
    };
    Ok(spec.with_seed(flags.seed))
}

pub fn feature_mask(flags: &LearnerFlags) -> Result<Vec<Feature>> {
    let mode: MaskMode = flags.features.parse().expect("infallible");
    preprocess::feature_mask(&mode).map_err(invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_keeps_directory() {
        assert_eq!(sibling(Path::new("out/features.jsonl"), "meta.json"), Path::new("out/features.meta.json"));
        assert_eq!(sibling(Path::new("norm"), "params.json"), Path::new("norm.params.json"));
    }

    #[test]
    fn invalid_is_recognizable_through_anyhow() {
        let e = invalid("no records");
        assert!(e.downcast_ref::<Invalid>().is_some());
        let io = ingest_error(IngestError::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        });
        assert!(io.downcast_ref::<Invalid>().is_none());
        assert!(ingest_error(IngestError::NoRecords).downcast_ref::<Invalid>().is_some());
    }
}
