//! Query strategies: how ambiguous an instance looks to the current model.

use std::cmp::Ordering;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `1 - max(p)`.
pub fn uncertainty(p: &[f64]) -> f64 {
    1.0 - p.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Gap between the two most likely classes.
pub fn margin(p: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uncertainty,
    #[default]
    Margin,
    Entropy,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Uncertainty, Strategy::Margin, Strategy::Entropy, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uncertainty => "uncertainty",
            Strategy::Margin => "margin",
            Strategy::Entropy => "entropy",
            Strategy::Random => "random",
        }
    }

    /// Ambiguity on a common scale: larger means more worth querying.
    /// `None` for the random strategy.
    pub fn ambiguity(self, p: &[f64]) -> Option<f64> {
        match self {
            Strategy::Uncertainty => Some(uncertainty(p)),
            Strategy::Margin => Some(-margin(p)),
            Strategy::Entropy => Some(entropy(p)),
            Strategy::Random => None,
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected uncertainty, margin, entropy or random)"))
    }
}

/// One unlabeled candidate as seen by the selector.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub user_id: &'a str,
    pub proba: [f64; 2],
}

/// Positions (into `candidates`) of the `batch` instances to query, most
/// ambiguous first; equal scores go to the smaller user id. The random
/// strategy shuffles the id-sorted candidates with `seed`.
pub fn select_batch(candidates: &[Candidate<'_>], strategy: Strategy, batch: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    match strategy {
        Strategy::Random => {
            order.sort_by(|&a, &b| candidates[a].user_id.cmp(candidates[b].user_id));
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        s => {
            let scores: Vec<f64> = candidates
                .iter()
                .map(|c| s.ambiguity(&c.proba).expect("scored strategy"))
                .collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then_with(|| candidates[a].user_id.cmp(candidates[b].user_id))
            });
        }
    }
    order.truncate(batch);
    order
}

/// Sort helper for callers ranking by a score with the same tie rule.
pub fn by_score_then_id(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Strategy;

    #[test]
    fn formula_examples() {
        assert!((uncertainty(&[0.9, 0.1]) - 0.1).abs() < 1e-12);
        assert_eq!(uncertainty(&[1.0, 0.0]), 0.0);
        assert_eq!(uncertainty(&[0.5, 0.5]), 0.5);
        assert!((margin(&[0.6, 0.4]) - 0.2).abs() < 1e-12);
        assert_eq!(margin(&[0.5, 0.5]), 0.0);
        assert_eq!(margin(&[1.0, 0.0]), 1.0);
        assert!((entropy(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.9, 0.1]) - 0.3251).abs() < 1e-4);
    }

    fn cand(id: &str, p1: f64) -> Candidate<'_> {
        Candidate { user_id: id, proba: [1.0 - p1, p1] }
    }

    #[test]
    fn margin_selection_example() {
        // margins a:0.1, b:0.5, c:0.2
        let c = [cand("a", 0.55), cand("b", 0.75), cand("c", 0.6)];
        assert_eq!(select_batch(&c, Strategy::Margin, 2, 0), vec![0, 2]);
        assert_eq!(select_batch(&c, Strategy::Margin, 10, 0).len(), 3);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let c = [cand("z", 0.5), cand("m", 0.5), cand("a", 0.9)];
        assert_eq!(select_batch(&c, Strategy::Uncertainty, 2, 0), vec![1, 0]);
    }

    #[test]
    fn random_is_seeded() {
        let ids: Vec<String> = (0..50).map(|i| format!("u{i:02}")).collect();
        let c: Vec<_> = ids.iter().map(|s| cand(s, 0.3)).collect();
        let a = select_batch(&c, Strategy::Random, 10, 4);
        assert_eq!(a, select_batch(&c, Strategy::Random, 10, 4));
        assert_ne!(a, select_batch(&c, Strategy::Random, 10, 5));
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn empty_pool_gives_empty_batch() {
        assert!(select_batch(&[], Strategy::Margin, 5, 0).is_empty());
    }

    proptest! {
        #[test]
        fn binary_rankings_agree(p1s in proptest::collection::vec(0.0f64..=1.0, 1..300), batch in 1usize..100) {
            let ids: Vec<String> = (0..p1s.len()).map(|i| format!("u{i:04}")).collect();
            let c: Vec<_> = ids.iter().zip(&p1s).map(|(s, &p)| cand(s, p)).collect();
            let set = |s| {
                let mut v = select_batch(&c, s, batch, 0);
                v.sort();
                v
            };
            prop_assert_eq!(set(Strategy::Uncertainty), set(Strategy::Margin));
            prop_assert_eq!(set(Strategy::Margin), set(Strategy::Entropy));
        }

        #[test]
        fn entropy_base_does_not_change_selection(p1s in proptest::collection::vec(0.0f64..=1.0, 1..200), batch in 1usize..50) {
            let ids: Vec<String> = (0..p1s.len()).map(|i| format!("u{i:04}")).collect();
            let nats: Vec<(f64, &str)> = ids.iter().zip(&p1s).map(|(s, &p)| (entropy(&[1.0 - p, p]), s.as_str())).collect();
            let bits: Vec<(f64, &str)> = nats.iter().map(|&(h, s)| (h / std::f64::consts::LN_2, s)).collect();
            let top = |v: &[(f64, &str)]| {
                let mut v = v.to_vec();
                v.sort_by(|a, b| by_score_then_id(*a, *b));
                v.into_iter().take(batch).map(|x| x.1.to_string()).collect::<Vec<_>>()
            };
            prop_assert_eq!(top(&nats), top(&bits));
        }
    }
}
