//! `al run` and `al simulate`.

use std::collections::BTreeSet;

use anyhow::Result;
use trustlens::active::{run_loop, write_curve_csv, LoopConfig, StopReason, StopRule};
use trustlens::experiment::{self, DeskConfig};
use trustlens::ingest;
use trustlens::synth::SyntheticOracle;
use trustlens::{LabelSource, LabeledInstance, LearnerSpec, Lexicon, Pool, RoundRecord};
use trustlens_service::{DatasetSource, ServiceConfig};

use crate::args::{AlRunArgs, OracleKind, SimulateArgs, StopFlags};
use crate::util::{self, ingest_error, invalid};

fn apply_stop(mut stop: StopRule, flags: &StopFlags) -> StopRule {
    if let Some(v) = flags.max_rounds {
        stop.max_rounds = v;
    }
    if let Some(v) = flags.min_gain {
        stop.min_gain = v;
    }
    if let Some(v) = flags.patience {
        stop.patience = v;
    }
    stop
}

fn write_curve(out: Option<&std::path::Path>, curve: &[RoundRecord]) -> Result<()> {
    util::emit(out, |w| Ok(write_curve_csv(curve, w)?))
}

fn report_stop(reason: StopReason, curve: &[RoundRecord]) {
    if let Some(last) = curve.last() {
        eprintln!(
            "stopped after round {} ({reason:?}): {} labeled, accuracy {:.4}",
            last.round_index, last.labeled_size, last.metrics.accuracy
        );
    }
}

pub fn run(args: &AlRunArgs) -> Result<()> {
    if args.oracle == OracleKind::Service {
        return serve_loop(args);
    }
    let truth_path = args
        .truth
        .as_ref()
        .ok_or_else(|| invalid("--oracle synthetic needs --truth with the known labels"))?;
    let truth = ingest::read_label_table(truth_path).map_err(ingest_error)?;
    let seeds = ingest::read_label_table(&args.seed_labels).map_err(ingest_error)?;
    let vectors = util::normalized_dir(&args.dataset, &args.scoring)?;
    let known: BTreeSet<&str> = vectors.iter().map(|v| v.user_id.as_str()).collect();
    if let Some(missing) = seeds.keys().find(|id| !known.contains(id.as_str())) {
        return Err(invalid(format!("seed user {missing} is not in the dataset")));
    }

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    let mut unanswerable = 0;
    for v in vectors {
        if let Some(&label) = seeds.get(&v.user_id) {
            labeled.push(LabeledInstance {
                features: v,
                label,
                annotator_ids: vec![],
                source: LabelSource::Seed,
            });
        } else if truth.contains_key(&v.user_id) {
            unlabeled.push(v);
        } else {
            unanswerable += 1;
        }
    }
    if unanswerable > 0 {
        eprintln!("{unanswerable} users without a known label were left out of the pool");
    }
    let pool = Pool::new(labeled, unlabeled, args.batch).map_err(invalid)?;
    let mut cfg = LoopConfig::new(util::learner_spec(&args.learner)?, args.strategy, util::feature_mask(&args.learner)?);
    cfg.folds = args.learner.folds;
    cfg.cv_seed = args.learner.seed;
    cfg.selection_seed = args.learner.seed;
    cfg.stop = apply_stop(StopRule::default(), &args.stop);
    let mut oracle = SyntheticOracle::new(truth);
    let (state, curve, reason) = run_loop(pool, cfg, &mut oracle).map_err(invalid)?;
    write_curve(args.out.as_deref(), &curve)?;
    if let Some(path) = &args.state_out {
        util::write_json(path, &state)?;
    }
    report_stop(reason, &curve);
    Ok(())
}

fn serve_loop(args: &AlRunArgs) -> Result<()> {
    let mut cfg = ServiceConfig::load(args.config.as_deref()).map_err(invalid)?;
    cfg.dataset = DatasetSource::Directory {
        dir: args.dataset.clone(),
        seed_labels: args.seed_labels.clone(),
    };
    cfg.learner = util::learner_spec(&args.learner)?;
    cfg.strategy = args.strategy;
    cfg.batch_size = args.batch;
    cfg.folds = args.learner.folds;
    cfg.features = args.learner.features.clone();
    cfg.cv_seed = args.learner.seed;
    cfg.selection_seed = args.learner.seed;
    cfg.stop = apply_stop(cfg.stop, &args.stop);
    cfg.dead_zone = args.scoring.dead_zone;
    cfg.clip_percentile = args.scoring.clip_percentile;
    cfg.lexicon = args.scoring.lexicon.clone().or(cfg.lexicon);
    if let Some(bind) = &args.bind {
        cfg.bind = bind.clone();
    }
    if let Some(dir) = &args.state_dir {
        cfg.state_dir = Some(dir.clone());
    }
    cfg.validate().map_err(invalid)?;
    crate::serve_config(cfg)
}

/// The experiment config after applying file and flag overrides.
pub fn desk_config(args: &SimulateArgs) -> Result<DeskConfig> {
    let mut cfg: DeskConfig = match &args.config {
        Some(path) => util::read_config(path)?,
        None => DeskConfig::default(),
    };
    if let Some(n) = args.users {
        cfg.cohort.n_users = n;
    }
    if let Some(n) = args.seed_size {
        let trusted = (n as f64 * cfg.cohort.trusted_share).round() as usize;
        cfg.seed_trusted = trusted;
        cfg.seed_untrusted = n - trusted;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(r) = args.rounds {
        cfg.stop.max_rounds = r;
    }
    if let Some(f) = args.folds {
        cfg.folds = f;
    }
    if let Some(g) = args.min_gain {
        cfg.stop.min_gain = g;
    }
    if let Some(p) = args.patience {
        cfg.stop.patience = p;
    }
    if cfg.batch_size == 0 {
        return Err(invalid("--batch must be at least 1"));
    }
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = desk_config(args)?;
    let spec = LearnerSpec::default_for(args.learner).with_seed(args.seed);
    let (curve, reason) =
        experiment::learning_curve(&cfg, args.seed, spec, args.strategy, &Lexicon::bundled()).map_err(invalid)?;
    write_curve(args.out.as_deref(), &curve)?;
    report_stop(reason, &curve);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn parse(extra: &[&str]) -> SimulateArgs {
        let mut argv = vec!["trustlens", "al", "simulate"];
        argv.extend(extra);
        match crate::args::Cli::parse_from(argv).command {
            crate::args::Command::Al(crate::args::AlCommand::Simulate(a)) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_override_the_desk_defaults() {
        let cfg = desk_config(&parse(&["--users", "600", "--seed-size", "100", "--rounds", "3", "--min-gain", "-0.5"])).unwrap();
        assert_eq!(cfg.cohort.n_users, 600);
        assert_eq!((cfg.seed_trusted, cfg.seed_untrusted), (58, 42));
        assert_eq!(cfg.stop.max_rounds, 3);
        assert_eq!(cfg.stop.min_gain, -0.5);
        assert_eq!(cfg.batch_size, DeskConfig::default().batch_size);
    }

    #[test]
    fn zero_batch_is_rejected() {
        let err = desk_config(&parse(&["--batch", "0"])).unwrap_err();
        assert!(err.downcast_ref::<crate::util::Invalid>().is_some());
    }
}
