use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustlens::learners::{Activation, ForestParams, Kernel, MlpParams, SvmParams};
use trustlens::{Label, LearnerSpec, Matrix, ProbabilisticClassifier};

fn noisy(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let flip = rng.random_bool(0.15);
        y.push(if (a + b > 1.0) != flip { Label::Trusted } else { Label::Untrusted });
        rows.push(vec![a, b, rng.random()]);
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn spread_across_seeds(n_trees: usize, x: &Matrix, y: &[Label], probe: &[f64]) -> f64 {
    let ps: Vec<f64> = (0..12)
        .map(|seed| {
            let spec = LearnerSpec::RandomForest(ForestParams {
                n_trees,
                seed,
                ..Default::default()
            });
            spec.fit(x, y).unwrap().predict_proba(probe)[1]
        })
        .collect();
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / ps.len() as f64
}

#[test]
fn forest_variance_shrinks_with_more_trees() {
    let (x, y) = noisy(300, 4);
    let probes = [[0.5, 0.5, 0.5], [0.45, 0.6, 0.1], [0.2, 0.7, 0.9]];
    let small: f64 = probes.iter().map(|p| spread_across_seeds(10, &x, &y, p)).sum();
    let large: f64 = probes.iter().map(|p| spread_across_seeds(200, &x, &y, p)).sum();
    assert!(large < small / 4.0, "10 trees {small}, 200 trees {large}");
}

#[test]
fn identical_seed_gives_bit_identical_predictions() {
    let (x, y) = noisy(200, 9);
    let specs = [
        LearnerSpec::RandomForest(ForestParams {
            n_trees: 20,
            seed: 5,
            ..Default::default()
        }),
        LearnerSpec::Svm(SvmParams {
            kernel: Kernel::Rbf { gamma: Some(2.0) },
            ..Default::default()
        }),
        LearnerSpec::Mlp(MlpParams {
            activation: Activation::Tanh,
            epochs: 30,
            seed: 5,
            ..Default::default()
        }),
    ];
    for spec in specs {
        let a = spec.fit(&x, &y).unwrap();
        let b = spec.fit(&x, &y).unwrap();
        for row in x.iter_rows() {
            let (pa, pb) = (a.predict_proba(row), b.predict_proba(row));
            assert_eq!(pa[1].to_bits(), pb[1].to_bits(), "{:?}", spec.kind());
        }
    }
}

#[test]
fn probabilities_are_distributions() {
    let (x, y) = noisy(150, 1);
    for kind in [trustlens::LearnerKind::RandomForest, trustlens::LearnerKind::Svm, trustlens::LearnerKind::Mlp] {
        let m = LearnerSpec::default_for(kind).fit(&x, &y).unwrap();
        for p in m.predict_proba_all(&x) {
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
