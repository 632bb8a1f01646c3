mod common;

use chrono::{TimeZone, Utc};
use trustlens::ingest::{self, Provenance};
use trustlens::preprocess::{feature_mask, MaskMode};
use trustlens::{Feature, Label, LearnerKind, LearnerSpec};

use common::{fixture_dir, max_error, read_expected, run_fixture};

#[test]
fn fixture_matches_oracle_tables() {
    let (raw, normalized) = run_fixture();
    assert_eq!(raw.len(), 20);
    let (err, cells) = max_error(&raw, &read_expected("expected_features.csv"));
    assert_eq!(cells, 20 * 21);
    assert!(err <= 1e-9, "raw max error {err}");
    let (err, _) = max_error(&normalized, &read_expected("expected_normalized.csv"));
    assert!(err <= 1e-9, "normalized max error {err}");
}

#[test]
fn alice_full_vector() {
    let (raw, _) = run_fixture();
    let alice = raw.iter().find(|v| v.user_id == "alice").unwrap();
    let want = &read_expected("expected_features.csv")["alice"];
    for f in Feature::ALL {
        assert!((alice.get(f) - want[f.name()]).abs() <= 1e-9, "{f}");
    }
    assert_eq!(alice.n_pos + alice.n_neu + alice.n_neg, 15.0);
}

#[test]
fn persist_is_idempotent_and_byte_stable() {
    let ds = ingest::load_dataset(&fixture_dir()).unwrap();
    let prov = Provenance {
        source_files: vec!["users.jsonl".into(), "tweets.jsonl".into()],
        filters_applied: vec!["public".into(), "dedup".into()],
        created_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ingest::persist(&ds.users, &ds.tweets, a.path(), &prov).unwrap();

    // reload what was written and persist again
    let again = ingest::load_dataset(a.path()).unwrap();
    assert_eq!(again.users, ds.users);
    assert_eq!(again.tweets, ds.tweets);
    let manifest = ingest::persist(&again.users, &again.tweets, b.path(), &prov).unwrap();
    assert_eq!((manifest.user_count, manifest.tweet_count), (20, 300));
    for name in [ingest::USERS_FILE, ingest::TWEETS_FILE, ingest::MANIFEST_FILE] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn tweets_are_ordered_newest_first_per_user() {
    let ds = ingest::load_dataset(&fixture_dir()).unwrap();
    for w in ds.tweets.windows(2) {
        assert!(w[0].user_id < w[1].user_id || (w[0].user_id == w[1].user_id && w[0].tweet_id > w[1].tweet_id));
    }
}

#[test]
fn fixture_trains_every_learner() {
    let (_, normalized) = run_fixture();
    let features = feature_mask(&MaskMode::PaperDefault).unwrap();
    let refs: Vec<_> = normalized.iter().collect();
    let x = trustlens::active::design_matrix(&refs, &features);
    let y: Vec<Label> = normalized
        .iter()
        .map(|v| if v.influence >= 0.5 { Label::Trusted } else { Label::Untrusted })
        .collect();
    assert!(y.contains(&Label::Trusted) && y.contains(&Label::Untrusted));
    for kind in [LearnerKind::RandomForest, LearnerKind::Svm, LearnerKind::Mlp] {
        let model = LearnerSpec::default_for(kind).fit(&x, &y).unwrap();
        use trustlens::ProbabilisticClassifier;
        for row in x.iter_rows() {
            let p = model.predict_proba(row);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }
}
