//! `ingest`, `score`, `normalize` and `train`.

use std::collections::BTreeSet;

use anyhow::Result;
use chrono::Utc;
use serde::Serialize;
use serde_json::json;
use trustlens::active::{design_matrix, evaluate_cv};
use trustlens::ingest::{self, Provenance, Reject, UserFormat};
use trustlens::learners::{ModelSnapshot, SNAPSHOT_VERSION};
use trustlens::preprocess::{self, NormalizationParams};
use trustlens::FeatureVector;

use crate::args::{IngestArgs, NormalizeArgs, ScoreArgs, TrainArgs};
use crate::util::{self, ingest_error, invalid};

#[derive(Serialize)]
struct SourcedReject<'a> {
    file: &'a str,
    #[serde(flatten)]
    reject: &'a Reject,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let format = args.user_format.unwrap_or_else(|| UserFormat::from_path(&args.users));
    let users = ingest::load_users(&args.users, format).map_err(ingest_error)?;
    if users.records.is_empty() {
        return Err(invalid("no records"));
    }
    let tweets = ingest::load_tweets(&args.tweets, args.max_id).map_err(ingest_error)?;
    let kept: BTreeSet<&str> = users.records.iter().map(|u| u.user_id.as_str()).collect();
    let (selected, orphans): (Vec<_>, Vec<_>) = tweets
        .records
        .into_iter()
        .partition(|t| kept.contains(t.user_id.as_str()));

    let mut filters = vec![
        "selection_rule: public accounts with followers and friends".to_string(),
        "dedup: tweet_id".to_string(),
        "tweets of selected users only".to_string(),
    ];
    if let Some(max_id) = args.max_id {
        filters.push(format!("max_id: {max_id}"));
    }
    let provenance = Provenance {
        source_files: vec![args.users.clone(), args.tweets.clone()],
        filters_applied: filters,
        created_at: args.created_at.unwrap_or_else(Utc::now),
    };
    let manifest = ingest::persist(&users.records, &selected, &args.out, &provenance).map_err(ingest_error)?;

    let rejects: Vec<SourcedReject<'_>> = users
        .rejects
        .iter()
        .map(|reject| SourcedReject { file: "users", reject })
        .chain(tweets.rejects.iter().map(|reject| SourcedReject { file: "tweets", reject }))
        .collect();
    util::write_jsonl(&args.out.join("rejects.jsonl"), &rejects)?;
    let stats = ingest::descriptive_stats(&users.records, args.sample_stddev).map_err(ingest_error)?;
    util::write_json(&args.out.join("stats.json"), &stats)?;
    println!(
        "ingested {} users and {} tweets into {} ({} records rejected, {} tweets of unselected users dropped)",
        manifest.user_count,
        manifest.tweet_count,
        args.out.display(),
        rejects.len(),
        orphans.len()
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let scored = util::score_dir(&args.dataset, &args.scoring)?;
    util::write_jsonl(&args.out, &scored.vectors)?;
    let meta = util::sibling(&args.out, "meta.json");
    util::write_json(&meta, &json!({ "metadata": scored.metadata, "rejects": scored.rejects }))?;
    println!(
        "scored {} users ({} rejected) into {}",
        scored.vectors.len(),
        scored.rejects.len(),
        args.out.display()
    );
    Ok(())
}

pub fn normalize(args: &NormalizeArgs) -> Result<()> {
    let vectors: Vec<FeatureVector> = util::read_jsonl(&args.features)?;
    if vectors.is_empty() {
        return Err(invalid("no records"));
    }
    if let Some(v) = vectors.iter().find(|v| v.normalized) {
        return Err(invalid(format!("vector for {} is already normalized", v.user_id)));
    }
    let params: NormalizationParams = match &args.params {
        Some(path) => util::read_config(path)?,
        None => {
            let params = preprocess::fit(&vectors, args.clip_percentile, &preprocess::default_unbounded()).map_err(invalid)?;
            let path = args.params_out.clone().unwrap_or_else(|| util::sibling(&args.out, "params.json"));
            util::write_json(&path, &params)?;
            params
        }
    };
    let out: Vec<FeatureVector> = vectors.iter().map(|v| preprocess::transform(v, &params)).collect();
    util::write_jsonl(&args.out, &out)?;
    println!("normalized {} vectors into {}", out.len(), args.out.display());
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let vectors: Vec<FeatureVector> = util::read_jsonl(&args.vectors)?;
    if let Some(v) = vectors.iter().find(|v| !v.normalized) {
        return Err(invalid(format!("vector for {} is not normalized; run `trustlens normalize` first", v.user_id)));
    }
    let labels = ingest::read_label_table(&args.labels).map_err(ingest_error)?;
    let known: BTreeSet<&str> = vectors.iter().map(|v| v.user_id.as_str()).collect();
    if let Some(missing) = labels.keys().find(|id| !known.contains(id.as_str())) {
        return Err(invalid(format!("labeled user {missing} has no feature vector")));
    }
    let labeled: Vec<&FeatureVector> = vectors.iter().filter(|v| labels.contains_key(&v.user_id)).collect();
    let y: Vec<_> = labeled.iter().map(|v| labels[&v.user_id]).collect();
    let features = util::feature_mask(&args.learner)?;
    let x = design_matrix(&labeled, &features);
    let spec = util::learner_spec(&args.learner)?;
    let report = evaluate_cv(&x, &y, &spec, args.learner.folds, args.learner.seed).map_err(invalid)?;
    let model = spec.fit(&x, &y).map_err(invalid)?;
    util::ensure_parent(&args.out)?;
    ModelSnapshot {
        format_version: SNAPSHOT_VERSION,
        features,
        spec: spec.clone(),
        model,
    }
    .save(&args.out)?;
    let summary = json!({
        "learner": spec.kind(),
        "hyperparameters": spec.hyperparameters(),
        "labeled": y.len(),
        "folds": args.learner.folds,
        "metrics": report,
    });
    match &args.metrics_out {
        Some(path) => util::write_json(path, &summary)?,
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}
