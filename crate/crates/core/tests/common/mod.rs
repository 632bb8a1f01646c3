#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use trustlens::preprocess;
use trustlens::scoring::{score_dataset, ScoringConfig};
use trustlens::{Feature, FeatureVector, Lexicon};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small")
}

/// Rows of an oracle table keyed by user id.
pub fn read_expected(name: &str) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(fixture_dir().join(name)).expect("oracle table");
    let headers = reader.headers().unwrap().clone();
    let mut out = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let mut row = BTreeMap::new();
        for (h, v) in headers.iter().zip(rec.iter()).skip(1) {
            row.insert(h.to_string(), v.parse::<f64>().unwrap());
        }
        out.insert(rec[0].to_string(), row);
    }
    out
}

/// Scores the fixture and returns (raw, normalized) vectors.
pub fn run_fixture() -> (Vec<FeatureVector>, Vec<FeatureVector>) {
    let ds = trustlens::ingest::load_dataset(&fixture_dir()).unwrap();
    let scored = score_dataset(&ds.users, &ds.tweets, &Lexicon::bundled(), &ScoringConfig::default()).unwrap();
    assert!(scored.rejects.is_empty(), "{:?}", scored.rejects);
    let (_, normalized) = preprocess::fit_transform(
        &scored.vectors,
        preprocess::DEFAULT_PERCENTILE,
        &preprocess::default_unbounded(),
    )
    .unwrap();
    (scored.vectors, normalized)
}

/// Largest absolute difference over every field, plus the number of
/// compared cells. Missing users or columns count as infinite error.
pub fn max_error(actual: &[FeatureVector], expected: &BTreeMap<String, BTreeMap<String, f64>>) -> (f64, usize) {
    let mut worst: f64 = if actual.len() == expected.len() { 0.0 } else { f64::INFINITY };
    let mut cells = 0;
    for v in actual {
        let Some(row) = expected.get(&v.user_id) else {
            return (f64::INFINITY, cells);
        };
        for f in Feature::ALL {
            let want = row.get(f.name()).copied().unwrap_or(f64::NAN);
            let err = (v.get(f) - want).abs();
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
            cells += 1;
        }
    }
    (worst, cells)
}
