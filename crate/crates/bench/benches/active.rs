use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trustlens::active::strategy::Candidate;
use trustlens::active::{select_batch, Strategy};
use trustlens::experiment::{learning_curve, loop_config, prepare};
use trustlens::{ActiveLearner, LearnerKind, LearnerSpec, Lexicon};
use trustlens_bench::{desk, probabilities};

fn selection(c: &mut Criterion) {
    let probas = probabilities(10_000, 3);
    let ids: Vec<String> = (0..probas.len()).map(|i| format!("u{i:05}")).collect();
    let candidates: Vec<Candidate<'_>> = ids
        .iter()
        .zip(&probas)
        .map(|(id, p)| Candidate { user_id: id, proba: *p })
        .collect();
    let mut group = c.benchmark_group("select_batch/10k");
    for strategy in Strategy::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(strategy.name()), &strategy, |b, &s| {
            b.iter(|| select_batch(black_box(&candidates), s, 100, 0))
        });
    }
    group.finish();
}

fn query_round(c: &mut Criterion) {
    let cfg = desk(5000);
    let run = prepare(&cfg, 0, &Lexicon::bundled()).unwrap();
    let spec = LearnerSpec::default_for(LearnerKind::RandomForest);
    let mut learner = ActiveLearner::new(run.pool, loop_config(&cfg, 0, spec.clone(), Strategy::Margin)).unwrap();
    learner.evaluate_round().unwrap();
    c.bench_function("active_learner/select/4000_pool", |b| b.iter(|| black_box(&learner).select().unwrap()));

    let small = desk(600);
    let mut group = c.benchmark_group("learning_curve");
    group.sample_size(10);
    group.bench_function("rf_margin/600_users", |b| {
        b.iter(|| {
            let mut cfg = small.clone();
            cfg.seed_trusted = 58;
            cfg.seed_untrusted = 42;
            cfg.batch_size = 20;
            cfg.folds = 5;
            cfg.stop.max_rounds = 3;
            learning_curve(&cfg, 0, spec.clone(), Strategy::Margin, &Lexicon::bundled()).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, selection, query_round);
criterion_main!(benches);
