//! File-based ingestion of exported user and tweet records.
//!
//! Input records are JSON objects shaped like the public API
//! (`followers_count`, `favorite_count`, `entities.urls`, `retweeted_status`,
//! ...) or the canonical form written by [`persist`]; both are accepted.
//! Users may also come from CSV with a header row. Bad records are collected
//! as [`Reject`]s instead of aborting the load.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Label, TweetRecord, UserProfile};

pub const USERS_FILE: &str = "users.jsonl";
pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("no records")]
    NoRecords,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserFormat {
    Jsonl,
    Csv,
}

impl UserFormat {
    /// Guesses from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => UserFormat::Csv,
            _ => UserFormat::Jsonl,
        }
    }
}

impl FromStr for UserFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(UserFormat::Jsonl),
            "csv" => Ok(UserFormat::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// A record that was skipped, with where and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
}

/// Field lookup shared by the JSON and CSV readers.
trait Fields {
    fn text(&self, key: &str) -> Option<String>;
    fn count(&self, key: &str) -> Option<Result<u64, String>>;
    fn flag(&self, key: &str) -> Option<Result<bool, String>>;
}

impl Fields for serde_json::Map<String, Value> {
    fn text(&self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    fn count(&self, key: &str) -> Option<Result<u64, String>> {
        let v = self.get(key)?;
        Some(match v {
            Value::Number(n) => n.as_u64().ok_or_else(|| format!("invalid {key}: {n}")),
            Value::String(s) => s.parse().map_err(|_| format!("invalid {key}: {s}")),
            other => Err(format!("invalid {key}: {other}")),
        })
    }

    fn flag(&self, key: &str) -> Option<Result<bool, String>> {
        let v = self.get(key)?;
        Some(match v {
            Value::Bool(b) => Ok(*b),
            other => Err(format!("invalid {key}: {other}")),
        })
    }
}

struct CsvRow<'a> {
    headers: &'a csv::StringRecord,
    record: &'a csv::StringRecord,
}

impl CsvRow<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        let idx = self.headers.iter().position(|h| h.trim() == key)?;
        let v = self.record.get(idx)?.trim();
        (!v.is_empty()).then_some(v)
    }
}

impl Fields for CsvRow<'_> {
    fn text(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    fn count(&self, key: &str) -> Option<Result<u64, String>> {
        let v = self.raw(key)?;
        Some(v.parse().map_err(|_| format!("invalid {key}: {v}")))
    }

    fn flag(&self, key: &str) -> Option<Result<bool, String>> {
        let v = self.raw(key)?;
        Some(match v.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(format!("invalid {key}: {v}")),
        })
    }
}

fn first_count(f: &dyn Fields, keys: &[&str], name: &str) -> Result<u64, String> {
    keys.iter()
        .find_map(|k| f.count(k))
        .unwrap_or_else(|| Err(format!("missing field {name}")))
}

fn profile_from(f: &dyn Fields, selection_rule: bool) -> Result<UserProfile, (Option<String>, String)> {
    let id = ["user_id", "id_str", "id"]
        .iter()
        .find_map(|k| f.text(k))
        .filter(|s| !s.is_empty());
    let Some(id) = id else {
        return Err((None, "missing field user_id".into()));
    };
    let fail = |reason: String| (Some(id.clone()), reason);
    let followers = first_count(f, &["followers", "followers_count"], "followers").map_err(fail)?;
    let friends = first_count(f, &["friends", "friends_count"], "friends").map_err(fail)?;
    let statuses = first_count(f, &["statuses", "statuses_count"], "statuses").map_err(fail)?;
    let listed = first_count(f, &["listed", "listed_count"], "listed").map_err(fail)?;
    let is_public = match (f.flag("is_public"), f.flag("protected")) {
        (Some(v), _) => v.map_err(fail)?,
        (None, Some(v)) => !v.map_err(fail)?,
        (None, None) => return Err(fail("missing field is_public".into())),
    };
    UserProfile::new(id.clone(), followers, friends, statuses, listed, is_public, selection_rule)
        .map_err(|e| fail(e.to_string()))
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

/// Loads user profiles, applying the public/non-zero selection rule.
pub fn load_users(path: &Path, format: UserFormat) -> Result<Loaded<UserProfile>, IngestError> {
    load_users_with(path, format, true)
}

pub fn load_users_with(
    path: &Path,
    format: UserFormat,
    selection_rule: bool,
) -> Result<Loaded<UserProfile>, IngestError> {
    let name = path.display().to_string();
    match format {
        UserFormat::Jsonl => read_users_jsonl(open(path)?, &name, selection_rule),
        UserFormat::Csv => read_users_csv(open(path)?, &name, selection_rule),
    }
}

/// JSONL users. A line that is not a JSON object is fatal; a well-formed
/// object with missing or invalid fields is rejected.
pub fn read_users_jsonl(
    reader: impl BufRead,
    source: &str,
    selection_rule: bool,
) -> Result<Loaded<UserProfile>, IngestError> {
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source_err| IngestError::Io {
            path: source.to_string(),
            source: source_err,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => m,
            Ok(_) => {
                return Err(IngestError::Parse {
                    path: source.to_string(),
                    line: line_no,
                    message: "expected a JSON object".into(),
                })
            }
            Err(e) => {
                return Err(IngestError::Parse {
                    path: source.to_string(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        match profile_from(&obj, selection_rule) {
            Ok(p) => out.records.push(p),
            Err((id, reason)) => out.rejects.push(Reject {
                line: line_no,
                id,
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn read_users_csv(
    reader: impl std::io::Read,
    source: &str,
    selection_rule: bool,
) -> Result<Loaded<UserProfile>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |e: csv::Error| IngestError::Parse {
        path: source.to_string(),
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(parse_err)?.clone();
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
    };
    for rec in rdr.records() {
        let record = rec.map_err(parse_err)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = CsvRow {
            headers: &headers,
            record: &record,
        };
        match profile_from(&row, selection_rule) {
            Ok(p) => out.records.push(p),
            Err((id, reason)) => out.rejects.push(Reject { line, id, reason }),
        }
    }
    Ok(out)
}

fn tweet_from(obj: &serde_json::Map<String, Value>) -> Result<TweetRecord, (Option<String>, String)> {
    let tweet_id = match ["tweet_id", "id", "id_str"].iter().find_map(|k| obj.count(k)) {
        Some(Ok(id)) => id,
        Some(Err(e)) => return Err((None, e)),
        None => return Err((None, "missing field tweet_id".into())),
    };
    let tid = Some(tweet_id.to_string());
    let fail = |reason: String| (tid.clone(), reason);
    let user = obj.get("user").and_then(Value::as_object);
    let user_id = obj
        .text("user_id")
        .or_else(|| user.and_then(|u| u.text("id_str").or_else(|| u.text("id"))))
        .filter(|s| !s.is_empty())
        .ok_or_else(|| fail("missing field user_id".into()))?;
    let retweet_count = first_count(obj, &["retweet_count"], "retweet_count").map_err(fail)?;
    let like_count = first_count(obj, &["like_count", "favorite_count"], "like_count").map_err(fail)?;
    let entities = obj.get("entities").and_then(Value::as_object);
    let entity_flag = |flag_key: &str, entity_key: &str| -> Result<bool, String> {
        if let Some(v) = obj.flag(flag_key) {
            return v;
        }
        Ok(entities
            .and_then(|e| e.get(entity_key))
            .and_then(Value::as_array)
            .is_some_and(|a| !a.is_empty()))
    };
    let has_url = entity_flag("has_url", "urls").map_err(fail)?;
    let has_hashtag = entity_flag("has_hashtag", "hashtags").map_err(fail)?;
    let is_retweet_of_other = match obj.flag("is_retweet_of_other") {
        Some(v) => v.map_err(fail)?,
        None => obj.get("retweeted_status").is_some_and(|v| !v.is_null()),
    };
    let text = obj
        .get("full_text")
        .or_else(|| obj.get("text"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok(TweetRecord {
        tweet_id,
        user_id,
        retweet_count,
        like_count,
        has_url,
        has_hashtag,
        is_retweet_of_other,
        text,
    })
}

/// Reads tweets from JSONL; every bad line becomes a reject.
pub fn read_tweets_jsonl(reader: impl BufRead, source: &str) -> Result<Loaded<TweetRecord>, IngestError> {
    let mut out = Loaded {
        records: Vec::new(),
        rejects: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::Io {
            path: source.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => tweet_from(&m),
            Ok(_) => Err((None, "expected a JSON object".into())),
            Err(e) => Err((None, format!("malformed record: {e}"))),
        };
        match parsed {
            Ok(t) => out.records.push(t),
            Err((id, reason)) => out.rejects.push(Reject {
                line: line_no,
                id,
                reason,
            }),
        }
    }
    Ok(out)
}

/// Keeps tweets with `tweet_id <= max_id`, collapses duplicate ids to their
/// first occurrence, and orders by user then descending tweet id.
pub fn dedup_and_order(tweets: Vec<TweetRecord>, max_id: Option<u64>) -> Vec<TweetRecord> {
    let mut seen = HashSet::new();
    let mut kept: Vec<TweetRecord> = tweets
        .into_iter()
        .filter(|t| max_id.is_none_or(|m| t.tweet_id <= m))
        .filter(|t| seen.insert(t.tweet_id))
        .collect();
    kept.sort_by(|a, b| a.user_id.cmp(&b.user_id).then(b.tweet_id.cmp(&a.tweet_id)));
    kept
}

pub fn load_tweets(path: &Path, max_id: Option<u64>) -> Result<Loaded<TweetRecord>, IngestError> {
    let loaded = read_tweets_jsonl(open(path)?, &path.display().to_string())?;
    Ok(Loaded {
        records: dedup_and_order(loaded.records, max_id),
        rejects: loaded.rejects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub total: f64,
    pub mean: f64,
    pub stddev: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64], sample: bool) -> Self {
        let n = values.len() as f64;
        let total: f64 = values.iter().sum();
        let mean = total / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let dof = if sample { n - 1.0 } else { n };
        let stddev = if dof > 0.0 { (ss / dof).sqrt() } else { 0.0 };
        Self { total, mean, stddev }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub users: usize,
    pub sample_stddev: bool,
    pub statuses: ColumnStats,
    pub followers: ColumnStats,
    pub listed: ColumnStats,
    pub friends: ColumnStats,
}

pub fn descriptive_stats(users: &[UserProfile], sample: bool) -> Result<DescriptiveStats, IngestError> {
    if users.is_empty() {
        return Err(IngestError::NoRecords);
    }
    let col = |f: fn(&UserProfile) -> u64| {
        let v: Vec<f64> = users.iter().map(|u| f(u) as f64).collect();
        ColumnStats::of(&v, sample)
    };
    Ok(DescriptiveStats {
        users: users.len(),
        sample_stddev: sample,
        statuses: col(|u| u.statuses),
        followers: col(|u| u.followers),
        listed: col(|u| u.listed),
        friends: col(|u| u.friends),
    })
}

/// Published reference statistics for the original 50,000-user cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceColumn {
    pub name: &'static str,
    pub total: f64,
    pub mean: f64,
    pub stddev: f64,
}

pub const REFERENCE_COHORT_SIZE: usize = 50_000;

pub const REFERENCE_STATS: [ReferenceColumn; 4] = [
    ReferenceColumn { name: "statuses", total: 473_152.0, mean: 1112.02, stddev: 8174.28 },
    ReferenceColumn { name: "followers", total: 28_347_960.0, mean: 5964.66, stddev: 199_066.10 },
    ReferenceColumn { name: "listed", total: 39_977.0, mean: 7.14, stddev: 228.97 },
    ReferenceColumn { name: "friends", total: 451_852.0, mean: 465.04, stddev: 2586.83 },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyNote {
    pub column: &'static str,
    /// `total / mean`: the cohort size the two published numbers imply.
    pub implied_users: f64,
    pub stated_users: usize,
    pub consistent: bool,
}

/// Checks whether each reference total and mean agree with the stated
/// cohort size (within 1%). They do not, which is why reproduction of the
/// reference table is reported rather than asserted.
pub fn reference_consistency() -> Vec<ConsistencyNote> {
    REFERENCE_STATS
        .iter()
        .map(|c| {
            let implied = c.total / c.mean;
            ConsistencyNote {
                column: c.name,
                implied_users: implied,
                stated_users: REFERENCE_COHORT_SIZE,
                consistent: (implied / REFERENCE_COHORT_SIZE as f64 - 1.0).abs() < 0.01,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub user_count: usize,
    pub tweet_count: usize,
    pub source_files: Vec<PathBuf>,
    pub filters_applied: Vec<String>,
    pub created_at: DateTime<Utc>,
}

/// Where a persisted dataset came from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub source_files: Vec<PathBuf>,
    pub filters_applied: Vec<String>,
    pub created_at: DateTime<Utc>,
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `users.jsonl`, `tweets.jsonl` and `manifest.json` into `dir`.
/// Output bytes depend only on the inputs and `provenance`.
pub fn persist(
    users: &[UserProfile],
    tweets: &[TweetRecord],
    dir: &Path,
    provenance: &Provenance,
) -> Result<DatasetManifest, IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_jsonl(&dir.join(USERS_FILE), users)?;
    write_jsonl(&dir.join(TWEETS_FILE), tweets)?;
    let manifest = DatasetManifest {
        user_count: users.len(),
        tweet_count: tweets.len(),
        source_files: provenance.source_files.clone(),
        filters_applied: provenance.filters_applied.clone(),
        created_at: provenance.created_at,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub users: Vec<UserProfile>,
    pub tweets: Vec<TweetRecord>,
    pub manifest: Option<DatasetManifest>,
}

/// Reads a directory written by [`persist`]. The manifest is optional so
/// hand-assembled fixture directories load too.
pub fn load_dataset(dir: &Path) -> Result<Dataset, IngestError> {
    let users = load_users(&dir.join(USERS_FILE), UserFormat::Jsonl)?;
    let tweets = load_tweets(&dir.join(TWEETS_FILE), None)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok(Dataset {
        users: users.records,
        tweets: tweets.records,
        manifest,
    })
}

/// Reads a `user_id → label` table: CSV with a `user_id,label` header, or
/// JSONL objects with the same two fields (chosen by extension). Labels
/// must be 0 or 1 and each user may appear once.
pub fn read_label_table(path: &Path) -> Result<BTreeMap<String, Label>, IngestError> {
    #[derive(Deserialize)]
    struct Row {
        user_id: String,
        label: i64,
    }
    let shown = path.display().to_string();
    let parse = |line: usize, message: String| IngestError::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut rows = Vec::new();
    if UserFormat::from_path(path) == UserFormat::Csv {
        let mut reader = csv::Reader::from_path(path).map_err(|e| parse(0, e.to_string()))?;
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            rows.push((i + 2, row.map_err(|e| parse(i + 2, e.to_string()))?));
        }
    } else {
        let file = File::open(path).map_err(io_err(path))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push((i + 1, serde_json::from_str(&line).map_err(|e| parse(i + 1, e.to_string()))?));
        }
    }
    let mut out = BTreeMap::new();
    for (line, row) in rows {
        let label = Label::try_from(row.label).map_err(|e| parse(line, e.to_string()))?;
        if out.insert(row.user_id.clone(), label).is_some() {
            return Err(parse(line, format!("duplicate user {}", row.user_id)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn users_jsonl(s: &str) -> Loaded<UserProfile> {
        read_users_jsonl(s.as_bytes(), "mem", true).unwrap()
    }

    #[test]
    fn zero_followers_rejected() {
        let out = users_jsonl(r#"{"user_id":"a","followers":0,"friends":5,"statuses":3,"listed":0,"is_public":true}"#);
        assert!(out.records.is_empty());
        assert_eq!(out.rejects[0].reason, "zero followers");
        assert_eq!(out.rejects[0].id.as_deref(), Some("a"));
    }

    #[test]
    fn empty_input_yields_nothing() {
        let out = users_jsonl("");
        assert!(out.records.is_empty() && out.rejects.is_empty());
    }

    #[test]
    fn three_valid_one_private() {
        let src = r#"{"id_str":"1","followers_count":10,"friends_count":3,"statuses_count":5,"listed_count":0,"protected":false}
{"id_str":"2","followers_count":11,"friends_count":4,"statuses_count":6,"listed_count":1,"protected":false}
{"id_str":"3","followers_count":12,"friends_count":5,"statuses_count":7,"listed_count":2,"protected":true}
{"user_id":"4","followers":13,"friends":6,"statuses":8,"listed":3,"is_public":true}"#;
        let out = users_jsonl(src);
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].line, 3);
        assert_eq!(out.rejects[0].reason, "private profile");
    }

    #[test]
    fn missing_field_rejects_but_bad_json_is_fatal() {
        let out = users_jsonl(r#"{"user_id":"a","friends":5,"statuses":3,"listed":0,"is_public":true}"#);
        assert_eq!(out.rejects[0].reason, "missing field followers");
        let err = read_users_jsonl("{\"user_id\":\"a\"}\n{oops".as_bytes(), "mem", true).unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }));
    }

    #[test]
    fn csv_users() {
        let src = "user_id,followers_count,friends_count,statuses_count,listed_count,is_public\n\
                   a,10,5,3,1,true\n\
                   b,0,5,3,1,true\n\
                   c,10,5,,1,true\n";
        let out = read_users_csv(src.as_bytes(), "mem", true).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 2);
        assert_eq!(out.rejects[1].reason, "missing field statuses");
        let ragged = "user_id,followers\na,1,2,3\n";
        assert!(matches!(
            read_users_csv(ragged.as_bytes(), "mem", true),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    fn t(id: u64) -> TweetRecord {
        TweetRecord {
            tweet_id: id,
            user_id: "u".into(),
            retweet_count: 0,
            like_count: 0,
            has_url: false,
            has_hashtag: false,
            is_retweet_of_other: false,
            text: String::new(),
        }
    }

    fn ids(v: &[TweetRecord]) -> Vec<u64> {
        v.iter().map(|t| t.tweet_id).collect()
    }

    #[test]
    fn max_id_filter_and_dedup() {
        let out = dedup_and_order(vec![t(9), t(7), t(7), t(3)], Some(7));
        assert_eq!(ids(&out), vec![7, 3]);
        assert_eq!(ids(&dedup_and_order(vec![t(5)], None)), vec![5]);
        assert!(dedup_and_order(vec![], Some(3)).is_empty());
    }

    #[test]
    fn api_shaped_tweets() {
        let src = r#"{"id":42,"user":{"id_str":"u1"},"retweet_count":3,"favorite_count":5,"entities":{"urls":[{"url":"x"}],"hashtags":[]},"retweeted_status":{"id":1},"full_text":"hello"}
{"id":43,"user_id":"u1","retweet_count":-1,"favorite_count":5}
not json
{"tweet_id":44,"user_id":"u1","retweet_count":0,"like_count":0,"has_url":false,"has_hashtag":true,"is_retweet_of_other":false,"text":""}"#;
        let out = read_tweets_jsonl(src.as_bytes(), "mem").unwrap();
        assert_eq!(out.records.len(), 2);
        let first = &out.records[0];
        assert!(first.has_url && !first.has_hashtag && first.is_retweet_of_other);
        assert_eq!((first.retweet_count, first.like_count), (3, 5));
        assert_eq!(first.text, "hello");
        assert!(out.records[1].has_hashtag);
        assert_eq!(out.rejects.len(), 2);
        assert_eq!(out.rejects[0].line, 2);
        assert!(out.rejects[1].reason.starts_with("malformed record"));
    }

    fn user(statuses: u64) -> UserProfile {
        UserProfile::new("u", 1, 1, statuses, 0, true, true).unwrap()
    }

    #[test]
    fn stats_examples() {
        let s = descriptive_stats(&[user(7)], false).unwrap();
        assert_eq!((s.statuses.total, s.statuses.mean, s.statuses.stddev), (7.0, 7.0, 0.0));
        let s = descriptive_stats(&[user(2), user(4)], false).unwrap();
        assert_eq!((s.statuses.mean, s.statuses.stddev), (3.0, 1.0));
        let s = descriptive_stats(&[user(2), user(4)], true).unwrap();
        assert!((s.statuses.stddev - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(descriptive_stats(&[], false), Err(IngestError::NoRecords)));
    }

    #[test]
    fn reference_table_is_flagged_inconsistent() {
        let notes = reference_consistency();
        assert!(notes.iter().all(|n| !n.consistent));
        // 473152 / 1112.02 is about 425 users, not 50,000
        assert!((notes[0].implied_users - 425.48).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn lowering_max_id_never_grows(
            raw in proptest::collection::vec(0u64..200, 0..80),
            a in 0u64..200,
            b in 0u64..200,
        ) {
            let tweets: Vec<_> = raw.iter().map(|&i| t(i)).collect();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = dedup_and_order(tweets.clone(), Some(lo));
            let big = dedup_and_order(tweets, Some(hi));
            prop_assert!(small.len() <= big.len());
            let big_ids: HashSet<u64> = ids(&big).into_iter().collect();
            prop_assert!(small.iter().all(|t| big_ids.contains(&t.tweet_id)));
        }
    }

    #[test]
    fn label_tables_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("l.csv");
        fs::write(&csv_path, "user_id,label\nb,1\na,0\n").unwrap();
        let jsonl_path = dir.path().join("l.jsonl");
        fs::write(&jsonl_path, "{\"user_id\":\"b\",\"label\":1}\n\n{\"user_id\":\"a\",\"label\":0}\n").unwrap();
        let a = read_label_table(&csv_path).unwrap();
        assert_eq!(a, read_label_table(&jsonl_path).unwrap());
        assert_eq!(a["a"], Label::Untrusted);
        assert_eq!(a["b"], Label::Trusted);

        fs::write(&csv_path, "user_id,label\na,2\n").unwrap();
        assert!(matches!(read_label_table(&csv_path), Err(IngestError::Parse { line: 2, .. })));
        fs::write(&csv_path, "user_id,label\na,1\na,0\n").unwrap();
        assert!(read_label_table(&csv_path).is_err());
    }
}
