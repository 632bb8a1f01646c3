//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustlens::active::design_matrix;
use trustlens::experiment::{prepare, DeskConfig};
use trustlens::synth::CohortConfig;
use trustlens::{Label, Lexicon, Matrix};

/// Desk-experiment config with a cohort of `n_users`.
pub fn desk(n_users: usize) -> DeskConfig {
    DeskConfig {
        cohort: CohortConfig {
            n_users,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// The seed set of the default desk experiment as a design matrix.
pub fn seed_set() -> (Matrix, Vec<Label>) {
    let cfg = desk(5000);
    let run = prepare(&cfg, 0, &Lexicon::bundled()).expect("default cohort");
    let rows: Vec<_> = run.pool.labeled().iter().map(|l| &l.features).collect();
    let y = run.pool.labeled().iter().map(|l| l.label).collect();
    (design_matrix(&rows, &cfg.features), y)
}

/// Heavy-tailed engagement counts, like per-tweet retweets.
pub fn counts(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random::<f64>().powi(4) * 10_000.0) as u64).collect()
}

/// Random binary class probabilities.
pub fn probabilities(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p: f64 = rng.random();
            [1.0 - p, p]
        })
        .collect()
}
