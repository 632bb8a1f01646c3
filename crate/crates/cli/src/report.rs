//! `report`: descriptive statistics, the feature-label correlation table
//! and per-strategy learning curves, all as CSV or JSON.

use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;
use trustlens::active::{run_loop, write_curve_csv, LoopConfig, StopRule};
use trustlens::ingest;
use trustlens::preprocess;
use trustlens::synth::{self, SyntheticOracle};
use trustlens::{Feature, LabelSource, LabeledInstance, Label};

use crate::args::ReportArgs;
use crate::util::{self, ingest_error, invalid};

pub fn report(args: &ReportArgs) -> Result<()> {
    let data = ingest::load_dataset(&args.dataset).map_err(ingest_error)?;
    let stats = ingest::descriptive_stats(&data.users, args.sample_stddev).map_err(ingest_error)?;
    util::write_json(
        &args.out.join("stats.json"),
        &json!({
            "dataset": stats,
            "reference": {
                "users": ingest::REFERENCE_COHORT_SIZE,
                "columns": ingest::REFERENCE_STATS,
                "consistency": ingest::reference_consistency(),
            },
        }),
    )?;
    let mut written = vec!["stats.json".to_string()];

    if let Some(path) = &args.labels {
        let labels = ingest::read_label_table(path).map_err(ingest_error)?;
        let vectors = util::normalized_dir(&args.dataset, &args.scoring)?;
        let labeled: Vec<LabeledInstance> = vectors
            .iter()
            .filter_map(|v| {
                labels.get(&v.user_id).map(|&label| LabeledInstance {
                    features: v.clone(),
                    label,
                    annotator_ids: vec![],
                    source: LabelSource::Seed,
                })
            })
            .collect();
        let table = preprocess::correlation_report(&labeled, &Feature::ALL).map_err(invalid)?;
        util::emit(Some(&args.out.join("correlation.csv")), |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["feature", "r", "degenerate"])?;
            for row in &table {
                csv.write_record([row.feature.name().to_string(), row.r.to_string(), row.degenerate.to_string()])?;
            }
            csv.flush()?;
            Ok(())
        })?;
        written.push("correlation.csv".into());

        if args.rounds > 0 {
            let pool_vectors: Vec<_> = labeled.iter().map(|l| l.features.clone()).collect();
            let trusted = labeled.iter().filter(|l| l.label == Label::Trusted).count();
            let seed_trusted = (args.seed_size as f64 * trusted as f64 / labeled.len() as f64).round() as usize;
            let seed_untrusted = args.seed_size.saturating_sub(seed_trusted);
            let truth: BTreeMap<String, Label> = labeled.iter().map(|l| (l.features.user_id.clone(), l.label)).collect();
            let spec = util::learner_spec(&args.learner)?;
            let features = util::feature_mask(&args.learner)?;
            for &strategy in &args.strategies {
                let pool = synth::seeded_pool(
                    pool_vectors.clone(),
                    &truth,
                    seed_trusted,
                    seed_untrusted,
                    args.batch,
                    args.learner.seed,
                )
                .map_err(invalid)?;
                let mut cfg = LoopConfig::new(spec.clone(), strategy, features.clone());
                cfg.folds = args.learner.folds;
                cfg.cv_seed = args.learner.seed;
                cfg.selection_seed = args.learner.seed;
                cfg.stop = StopRule {
                    max_rounds: args.rounds,
                    min_gain: -1.0,
                    ..StopRule::default()
                };
                let mut oracle = SyntheticOracle::new(truth.clone());
                let (_, curve, _) = run_loop(pool, cfg, &mut oracle).map_err(invalid)?;
                let name = format!("curve_{}_{}.csv", spec.kind().name(), strategy.name());
                util::emit(Some(&args.out.join(&name)), |w| Ok(write_curve_csv(&curve, w)?))?;
                written.push(name);
            }
        }
    }
    println!("wrote {} to {}", written.join(", "), args.out.display());
    Ok(())
}
