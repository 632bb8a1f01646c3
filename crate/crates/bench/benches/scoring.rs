use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trustlens::preprocess;
use trustlens::scoring::{self, ScoringConfig};
use trustlens::synth::{self, CohortConfig};
use trustlens::Lexicon;
use trustlens_bench::counts;

fn h_index(c: &mut Criterion) {
    let mut group = c.benchmark_group("h_index");
    for n in [40, 1_000, 100_000] {
        let data = counts(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| b.iter(|| scoring::h_index(black_box(d))));
    }
    group.finish();
}

fn score_and_normalize(c: &mut Criterion) {
    let cohort = synth::generate(&CohortConfig {
        n_users: 2000,
        ..Default::default()
    });
    let lexicon = Lexicon::bundled();
    let cfg = ScoringConfig::default();
    c.bench_function("score_dataset/2000_users", |b| {
        b.iter(|| scoring::score_dataset(black_box(&cohort.users), &cohort.tweets, &lexicon, &cfg).unwrap())
    });
    let scored = scoring::score_dataset(&cohort.users, &cohort.tweets, &lexicon, &cfg).unwrap();
    c.bench_function("fit_transform/2000_users", |b| {
        b.iter(|| {
            preprocess::fit_transform(black_box(&scored.vectors), preprocess::DEFAULT_PERCENTILE, &preprocess::default_unbounded())
                .unwrap()
        })
    });
}

criterion_group!(benches, h_index, score_and_normalize);
criterion_main!(benches);
