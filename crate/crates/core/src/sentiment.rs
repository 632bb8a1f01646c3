//! Lexicon-based polarity scoring of tweet text.
//!
//! Text is lowercased, URLs and `@mentions` are dropped, hashtag marks are
//! stripped (the tag word itself is kept), apostrophes are removed so that
//! contractions such as `don't` become a single token, and the rest is split
//! on non-alphanumeric characters. The polarity of a text is the mean weight
//! of the tokens found in the lexicon; a token immediately preceded by a
//! negator contributes its weight with the sign flipped.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("weight {weight} for `{token}` outside [-1, 1]")]
    WeightOutOfRange { token: String, weight: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
    version: String,
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        static CELL: OnceLock<Lexicon> = OnceLock::new();
        CELL.get_or_init(|| Self::parse(BUNDLED).expect("bundled lexicon is well formed"))
            .clone()
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parses the TSV form: `token<TAB>weight`, `#negator<TAB>token`,
    /// `#version<TAB>v`; other `#` lines are comments.
    pub fn parse(src: &str) -> Result<Self, LexiconError> {
        let mut entries = HashMap::new();
        let mut negators = HashSet::new();
        let mut version = String::from("unversioned");
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.splitn(2, '\t');
            let head = cols.next().unwrap_or_default();
            let tail = cols.next();
            match (head, tail) {
                ("#negator", Some(tok)) => {
                    negators.insert(tok.trim().to_lowercase());
                }
                ("#version", Some(v)) => version = v.trim().to_string(),
                (h, _) if h.starts_with('#') => {}
                (tok, Some(w)) => {
                    let weight: f64 = w.trim().parse().map_err(|_| LexiconError::Parse {
                        line: i + 1,
                        reason: format!("bad weight `{}`", w.trim()),
                    })?;
                    if !(-1.0..=1.0).contains(&weight) {
                        return Err(LexiconError::WeightOutOfRange {
                            token: tok.to_string(),
                            weight,
                        });
                    }
                    entries.insert(tok.trim().to_lowercase(), weight);
                }
                (_, None) => {
                    return Err(LexiconError::Parse {
                        line: i + 1,
                        reason: "expected token<TAB>weight".into(),
                    })
                }
            }
        }
        Ok(Self {
            entries,
            negators,
            version,
        })
    }

    /// Builds a lexicon in memory, mostly for tests.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (&'a str, f64)>,
        negators: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, LexiconError> {
        let mut map = HashMap::new();
        for (tok, weight) in entries {
            if !(-1.0..=1.0).contains(&weight) {
                return Err(LexiconError::WeightOutOfRange {
                    token: tok.to_string(),
                    weight,
                });
            }
            map.insert(tok.to_lowercase(), weight);
        }
        Ok(Self {
            entries: map,
            negators: negators.into_iter().map(str::to_lowercase).collect(),
            version: "inline".into(),
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

/// Tokenizes `text` the way [`polarity`] sees it.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        if lower.starts_with('@')
            || lower.starts_with("http://")
            || lower.starts_with("https://")
            || lower.starts_with("www.")
        {
            continue;
        }
        let cleaned: String = lower
            .chars()
            .filter(|c| *c != '\'' && *c != '\u{2019}')
            .collect();
        tokens.extend(
            cleaned
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(str::to_string),
        );
    }
    tokens
}

/// Mean matched weight in `[-1, 1]`; `0.0` when nothing matches.
pub fn polarity(text: &str, lexicon: &Lexicon) -> f64 {
    let tokens = tokenize(text);
    let mut sum = 0.0;
    let mut matched = 0usize;
    for (i, tok) in tokens.iter().enumerate() {
        if lexicon.is_negator(tok) {
            continue;
        }
        if let Some(w) = lexicon.weight(tok) {
            let negated = i > 0 && lexicon.is_negator(&tokens[i - 1]);
            sum += if negated { -w } else { w };
            matched += 1;
        }
    }
    if matched == 0 {
        0.0
    } else {
        (sum / matched as f64).clamp(-1.0, 1.0)
    }
}

/// Three-way class with a symmetric neutral band; the band edges are neutral.
pub fn classify(polarity: f64, dead_zone: f64) -> Polarity {
    if polarity > dead_zone {
        Polarity::Positive
    } else if polarity < -dead_zone {
        Polarity::Negative
    } else {
        Polarity::Neutral
    }
}

pub const DEFAULT_DEAD_ZONE: f64 = 0.05;

/// Positive/neutral/negative tallies over a set of texts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentCounts {
    pub positive: u64,
    pub neutral: u64,
    pub negative: u64,
}

impl SentimentCounts {
    pub fn tally<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        lexicon: &Lexicon,
        dead_zone: f64,
    ) -> Self {
        let mut counts = Self::default();
        for text in texts {
            match classify(polarity(text, lexicon), dead_zone) {
                Polarity::Positive => counts.positive += 1,
                Polarity::Neutral => counts.neutral += 1,
                Polarity::Negative => counts.negative += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> u64 {
        self.positive + self.neutral + self.negative
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::from_entries([("good", 0.7), ("bad", -0.7), ("great", 0.8)], ["not"]).unwrap()
    }

    #[test]
    fn empty_text_is_zero() {
        assert_eq!(polarity("", &lex()), 0.0);
        assert_eq!(polarity("nothing matches here", &lex()), 0.0);
    }

    #[test]
    fn mean_of_matched_weights() {
        assert!((polarity("good good", &lex()) - 0.7).abs() < 1e-15);
        assert!((polarity("good bad", &lex())).abs() < 1e-15);
    }

    #[test]
    fn negator_flips_next_token_only() {
        assert!((polarity("not good", &lex()) + 0.7).abs() < 1e-15);
        // window is exactly one token
        assert!((polarity("not very good", &lex()) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn strips_urls_mentions_and_hash_marks() {
        assert_eq!(
            tokenize("Good day @bad_guy see https://bad.example #Great!"),
            vec!["good", "day", "see", "great"]
        );
        assert_eq!(tokenize("Don't"), vec!["dont"]);
    }

    #[test]
    fn classify_boundaries_are_neutral() {
        assert_eq!(classify(0.0, 0.05), Polarity::Neutral);
        assert_eq!(classify(0.05, 0.05), Polarity::Neutral);
        assert_eq!(classify(-0.05, 0.05), Polarity::Neutral);
        assert_eq!(classify(0.0500001, 0.05), Polarity::Positive);
        assert_eq!(classify(-0.5, 0.05), Polarity::Negative);
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::bundled();
        assert!(lex.len() > 1000);
        assert_eq!(lex.weight("good"), Some(0.7));
        assert!(lex.is_negator("not"));
        assert!(polarity("This is not good", &lex) < 0.0);
        assert!(polarity("What a wonderful, honest speech", &lex) > 0.0);
    }

    #[test]
    fn parse_rejects_out_of_range_weight() {
        assert!(matches!(
            Lexicon::parse("good\t1.5\n"),
            Err(LexiconError::WeightOutOfRange { .. })
        ));
        assert!(matches!(
            Lexicon::parse("good\tabc\n"),
            Err(LexiconError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tally_counts_each_text() {
        let c = SentimentCounts::tally(["good", "bad", "meh", "not bad"], &lex(), 0.05);
        assert_eq!(
            c,
            SentimentCounts {
                positive: 2,
                neutral: 1,
                negative: 1
            }
        );
    }

    proptest! {
        #[test]
        fn classify_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, dz in 0.0f64..0.99) {
            let rank = |p: Polarity| match p { Polarity::Negative => 0, Polarity::Neutral => 1, Polarity::Positive => 2 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(rank(classify(lo, dz)) <= rank(classify(hi, dz)));
        }

        #[test]
        fn concatenation_lies_between(
            xs in proptest::collection::vec(prop_oneof![Just("good"), Just("bad"), Just("great"), Just("filler")], 1..10),
            ys in proptest::collection::vec(prop_oneof![Just("good"), Just("bad"), Just("great"), Just("filler")], 1..10),
        ) {
            let lex = lex();
            let a = xs.join(" ");
            let b = ys.join(" ");
            let pa = polarity(&a, &lex);
            let pb = polarity(&b, &lex);
            let pab = polarity(&format!("{a} {b}"), &lex);
            let a_matched = xs.iter().any(|t| *t != "filler");
            let b_matched = ys.iter().any(|t| *t != "filler");
            if a_matched && b_matched {
                prop_assert!(pab >= pa.min(pb) - 1e-12 && pab <= pa.max(pb) + 1e-12);
            }
        }

        #[test]
        fn polarity_in_range(s in "\\PC{0,80}") {
            let p = polarity(&s, &Lexicon::bundled());
            prop_assert!((-1.0..=1.0).contains(&p));
        }
    }
}
