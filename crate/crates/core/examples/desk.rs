//! Prints the margin-sampling curve and the learner comparison for a few
//! synthetic cohorts: `cargo run --release --example desk -- 3`.

use trustlens::active::Strategy;
use trustlens::experiment::{learner_ordering, learning_curve, DeskConfig};
use trustlens::{LearnerKind, LearnerSpec, Lexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = DeskConfig::default();
    let lex = Lexicon::bundled();
    for seed in 0..seeds {
        let row = learner_ordering(&cfg, seed, &lex)?;
        let mlp: Vec<String> = row.mlp.iter().map(|s| format!("{} {:.3}", s.name, s.accuracy)).collect();
        println!("seed {seed}: rf {:.3} svm {:.3} {}", row.forest, row.svm, mlp.join(" "));
        let (curve, _) = learning_curve(&cfg, seed, LearnerSpec::default_for(LearnerKind::RandomForest), Strategy::Margin, &lex)?;
        for r in curve {
            println!("  round {:2} labeled {:5} accuracy {:.3}", r.round_index, r.labeled_size, r.metrics.accuracy);
        }
    }
    Ok(())
}
