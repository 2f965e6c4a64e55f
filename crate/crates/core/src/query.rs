//! Selection and aggregation over trail records.
//!
//! A [`FieldSelector`] is a dotted path into a record's serialized form, with
//! a few shorthands:
//!
//! * `context.code`, `context.registered_at` read the record header;
//! * `results.<name>` reads `results.metrics.<name>`;
//! * `training_params.<name>` reads `training_params.hyperparameters.<name>`.
//!
//! Hyperparameter type tags and metric shapes are unwrapped, so
//! `training_params.batch_size` yields `256` and `results.accuracy` yields
//! either a real or a sample list.
//!
//! Predicates are conjunctions of `path op value` atoms separated by
//! whitespace. Values containing spaces are double-quoted. Ops:
//!
//! | op   | meaning                                        |
//! |------|------------------------------------------------|
//! | `=`  | equal (numeric, boolean, timestamp or text)    |
//! | `!=` | present and not equal                          |
//! | `<`  | less than (numeric or ISO-8601 timestamp)      |
//! | `>`  | greater than (numeric or ISO-8601 timestamp)   |
//! | `~`  | text contains                                  |
//! | `?`  | present (takes no value)                       |
//! | `!?` | absent (takes no value)                        |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::record::{AnyRecord, RecordKind, TrailRecord};
use crate::stats::{summarize, SummaryStats};
use crate::store::TrailStore;
use crate::time::Timestamp;

/// Anything that can be viewed as a serialized record.
pub trait Fields {
    fn fields(&self) -> Value;
    fn record_code(&self) -> u64;
}

impl<R: TrailRecord> Fields for R {
    fn fields(&self) -> Value {
        serde_json::to_value(self).expect("records always serialize")
    }

    fn record_code(&self) -> u64 {
        self.code()
    }
}

impl Fields for AnyRecord {
    fn fields(&self) -> Value {
        self.to_value()
    }

    fn record_code(&self) -> u64 {
        self.code()
    }
}

/// A resolved field value.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Text(String),
    Int(i64),
    Real(f64),
    Bool(bool),
    Samples(Vec<f64>),
    List(Vec<FieldValue>),
}

impl FieldValue {
    fn from_json(v: &Value) -> Option<FieldValue> {
        match v {
            Value::Null | Value::Object(_) => None,
            Value::Bool(b) => Some(FieldValue::Bool(*b)),
            Value::Number(n) => n
                .as_i64()
                .map(FieldValue::Int)
                .or_else(|| n.as_f64().map(FieldValue::Real)),
            Value::String(s) => Some(FieldValue::Text(s.clone())),
            Value::Array(items) => {
                if !items.is_empty() && items.iter().all(Value::is_number) {
                    Some(FieldValue::Samples(
                        items.iter().filter_map(Value::as_f64).collect(),
                    ))
                } else {
                    Some(FieldValue::List(
                        items.iter().filter_map(FieldValue::from_json).collect(),
                    ))
                }
            }
        }
    }

    /// Numeric view: integers and reals as is, sample lists by their mean.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            FieldValue::Int(i) => Some(*i as f64),
            FieldValue::Real(r) => Some(*r),
            FieldValue::Samples(s) if !s.is_empty() => Some(s.iter().sum::<f64>() / s.len() as f64),
            _ => None,
        }
    }

    /// Individual numeric observations: one for a scalar, all for a sample list.
    pub fn samples(&self) -> Option<Vec<f64>> {
        match self {
            FieldValue::Int(i) => Some(vec![*i as f64]),
            FieldValue::Real(r) => Some(vec![*r]),
            FieldValue::Samples(s) if !s.is_empty() => Some(s.clone()),
            _ => None,
        }
    }

    fn as_time(&self) -> Option<Timestamp> {
        match self {
            FieldValue::Text(s) => s.parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Text(s) => f.write_str(s),
            FieldValue::Int(i) => write!(f, "{i}"),
            FieldValue::Real(r) => write!(f, "{r}"),
            FieldValue::Bool(b) => write!(f, "{b}"),
            FieldValue::Samples(s) => {
                let parts: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            FieldValue::List(items) => {
                let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// A dotted path into a record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldSelector {
    raw: String,
    segments: Vec<String>,
}

impl FieldSelector {
    pub fn as_str(&self) -> &str {
        &self.raw
    }

    /// The path after shorthand expansion, e.g. `results.metrics.accuracy`.
    pub fn canonical(&self) -> String {
        self.segments.join(".")
    }

    pub fn resolve<F: Fields + ?Sized>(&self, record: &F) -> Option<FieldValue> {
        self.resolve_value(&record.fields())
    }

    pub fn resolve_value(&self, root: &Value) -> Option<FieldValue> {
        let mut cur = root;
        for seg in &self.segments {
            cur = cur.get(seg)?;
        }
        let parent = self
            .segments
            .len()
            .checked_sub(2)
            .map(|i| self.segments[i].as_str());
        match parent {
            Some("hyperparameters") => unwrap_tagged(cur, &["text", "int", "real", "bool"]),
            Some("metrics") => unwrap_tagged(cur, &["scalar", "samples"]),
            _ => FieldValue::from_json(cur),
        }
    }
}

fn unwrap_tagged(v: &Value, tags: &[&str]) -> Option<FieldValue> {
    let obj = v.as_object()?;
    if obj.len() != 1 {
        return None;
    }
    let (tag, inner) = obj.iter().next()?;
    if !tags.contains(&tag.as_str()) {
        return None;
    }
    FieldValue::from_json(inner)
}

impl FromStr for FieldSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let raw = s.trim();
        let parts: Vec<&str> = raw.split('.').collect();
        let valid = |p: &&str| {
            !p.is_empty()
                && p.chars()
                    .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        };
        if raw.is_empty() || !parts.iter().all(valid) {
            return Err(Error::Selector(format!("malformed field path {s:?}")));
        }
        let mut segments: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
        match (segments[0].as_str(), segments.get(1).map(String::as_str)) {
            ("context", Some("code" | "registered_at" | "schema_version")) => {
                segments.remove(0);
            }
            ("results", Some(name)) if name != "metrics" && name != "model_ref" => {
                segments.insert(1, "metrics".into());
            }
            ("training_params", Some(name)) if name != "algorithm" && name != "hyperparameters" => {
                segments.insert(1, "hyperparameters".into());
            }
            _ => {}
        }
        Ok(FieldSelector {
            raw: raw.to_string(),
            segments,
        })
    }
}

impl fmt::Display for FieldSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Literal {
    Number(f64),
    Time(Timestamp),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Eq(FieldSelector, String),
    Ne(FieldSelector, String),
    Lt(FieldSelector, String),
    Gt(FieldSelector, String),
    Contains(FieldSelector, String),
    Present(FieldSelector),
    Absent(FieldSelector),
}

fn ordered_literal(s: &str) -> Option<Literal> {
    if let Ok(x) = s.parse::<f64>() {
        if x.is_finite() {
            return Some(Literal::Number(x));
        }
    }
    s.parse::<Timestamp>().ok().map(Literal::Time)
}

fn values_equal(v: &FieldValue, lit: &str) -> bool {
    match v {
        FieldValue::Bool(b) => lit.parse::<bool>().is_ok_and(|l| l == *b),
        FieldValue::Int(_) | FieldValue::Real(_) | FieldValue::Samples(_) => {
            match (v.as_number(), lit.parse::<f64>()) {
                (Some(x), Ok(l)) => x == l,
                _ => v.to_string() == lit,
            }
        }
        FieldValue::Text(s) => match (v.as_time(), lit.parse::<Timestamp>()) {
            (Some(a), Ok(b)) => a == b,
            _ => s == lit,
        },
        FieldValue::List(items) => items.iter().any(|i| values_equal(i, lit)),
    }
}

fn compare(v: &FieldValue, lit: &str) -> Option<std::cmp::Ordering> {
    match ordered_literal(lit)? {
        Literal::Number(l) => v.as_number().and_then(|x| x.partial_cmp(&l)),
        Literal::Time(t) => v.as_time().map(|x| x.cmp(&t)),
    }
}

impl Atom {
    pub fn matches<F: Fields + ?Sized>(&self, record: &F) -> bool {
        self.matches_value(&record.fields())
    }

    fn matches_value(&self, root: &Value) -> bool {
        use std::cmp::Ordering::{Greater, Less};
        match self {
            Atom::Present(sel) => sel.resolve_value(root).is_some(),
            Atom::Absent(sel) => sel.resolve_value(root).is_none(),
            Atom::Eq(sel, lit) => sel
                .resolve_value(root)
                .is_some_and(|v| values_equal(&v, lit)),
            Atom::Ne(sel, lit) => sel
                .resolve_value(root)
                .is_some_and(|v| !values_equal(&v, lit)),
            Atom::Lt(sel, lit) => sel
                .resolve_value(root)
                .is_some_and(|v| compare(&v, lit) == Some(Less)),
            Atom::Gt(sel, lit) => sel
                .resolve_value(root)
                .is_some_and(|v| compare(&v, lit) == Some(Greater)),
            Atom::Contains(sel, lit) => sel.resolve_value(root).is_some_and(|v| match &v {
                FieldValue::List(items) => {
                    items.iter().any(|i| i.to_string().contains(lit.as_str()))
                }
                other => other.to_string().contains(lit.as_str()),
            }),
        }
    }
}

/// A conjunction of atoms; the empty predicate matches everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

impl Predicate {
    pub fn all() -> Self {
        Predicate::default()
    }

    pub fn and(mut self, other: Predicate) -> Self {
        self.atoms.extend(other.atoms);
        self
    }

    /// Parse already-split tokens (`path op value ...`).
    pub fn parse_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut it = tokens.iter().map(AsRef::as_ref).peekable();
        while let Some(path) = it.next() {
            let sel: FieldSelector = path.parse()?;
            let op = it
                .next()
                .ok_or_else(|| Error::Selector(format!("missing operator after {path:?}")))?;
            let mut value = || {
                it.next()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Selector(format!("missing value after {path} {op}")))
            };
            let atom = match op {
                "?" => Atom::Present(sel),
                "!?" => Atom::Absent(sel),
                "=" => Atom::Eq(sel, value()?),
                "!=" => Atom::Ne(sel, value()?),
                "~" => Atom::Contains(sel, value()?),
                "<" | ">" => {
                    let v = value()?;
                    if ordered_literal(&v).is_none() {
                        return Err(Error::Selector(format!(
                            "{op} needs a number or ISO-8601 timestamp, got {v:?}"
                        )));
                    }
                    if op == "<" {
                        Atom::Lt(sel, v)
                    } else {
                        Atom::Gt(sel, v)
                    }
                }
                other => return Err(Error::Selector(format!("unknown operator {other:?}"))),
            };
            atoms.push(atom);
        }
        Ok(Predicate { atoms })
    }

    pub fn matches<F: Fields + ?Sized>(&self, record: &F) -> bool {
        if self.atoms.is_empty() {
            return true;
        }
        let root = record.fields();
        self.atoms.iter().all(|a| a.matches_value(&root))
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = shlex::split(s)
            .ok_or_else(|| Error::Selector(format!("unbalanced quotes in {s:?}")))?;
        Predicate::parse_tokens(&tokens)
    }
}

/// Order-preserving subset of `records` matching `predicate`.
pub fn filter_records<F: Fields + Clone>(records: &[F], predicate: &Predicate) -> Vec<F> {
    records
        .iter()
        .filter(|r| predicate.matches(*r))
        .cloned()
        .collect()
}

pub fn filter(
    store: &TrailStore,
    kind: RecordKind,
    predicate: &Predicate,
) -> Result<Vec<AnyRecord>> {
    Ok(filter_records(&store.scan_any(kind)?, predicate))
}

/// Label used for records whose group key does not resolve.
pub const ABSENT_GROUP: &str = "(absent)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub groups: BTreeMap<String, SummaryStats>,
    /// Records whose metric did not resolve to a number or sample list.
    pub skipped: usize,
}

/// Summary statistics of `metric` per distinct value of `key`. Sample lists
/// are flattened into their group.
pub fn group_stats<F: Fields>(
    records: &[F],
    key: &FieldSelector,
    metric: &FieldSelector,
) -> GroupStats {
    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for r in records {
        let root = r.fields();
        let Some(samples) = metric.resolve_value(&root).and_then(|v| v.samples()) else {
            skipped += 1;
            continue;
        };
        let label = key
            .resolve_value(&root)
            .map_or_else(|| ABSENT_GROUP.to_string(), |v| v.to_string());
        buckets.entry(label).or_default().extend(samples);
    }
    let groups = buckets
        .into_iter()
        .map(|(k, v)| (k, summarize(&v).expect("buckets are non-empty and finite")))
        .collect();
    GroupStats { groups, skipped }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<F> {
    pub score: f64,
    pub record: F,
}

/// The best `k` records by `metric` (sample lists by their mean), highest
/// first; ties go to the lower code. Records without the metric are left out.
pub fn top_k<F: Fields + Clone>(records: &[F], metric: &FieldSelector, k: usize) -> Vec<Ranked<F>> {
    let mut scored: Vec<Ranked<F>> = records
        .iter()
        .filter_map(|r| {
            let score = metric.resolve(r)?.as_number()?;
            score.is_finite().then(|| Ranked {
                score,
                record: r.clone(),
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.record.record_code().cmp(&b.record.record_code()))
    });
    scored.truncate(k);
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::*;

    fn run(code: u64, algo: &str, acc: MetricResult, ts: &str) -> TrainingRecord {
        let mut r = TrainingRecord {
            code,
            registered_at: Some(ts.parse().unwrap()),
            ..Default::default()
        };
        r.training_params.algorithm = algo.into();
        r.training_params
            .hyperparameters
            .insert("batch_size".into(), HyperValue::Int(256));
        r.results.metrics.insert("accuracy".into(), acc);
        r
    }

    fn fixture() -> Vec<TrainingRecord> {
        vec![
            run(1, "MLP", MetricResult::Scalar(0.90), "2018-11-20T10:00:00Z"),
            run(
                2,
                "LGBMClassifier",
                MetricResult::Scalar(0.88),
                "2018-11-24T09:00:00Z",
            ),
            run(
                3,
                "MLP",
                MetricResult::Samples(vec![0.91, 0.92]),
                "2018-11-24T12:00:00Z",
            ),
            run(4, "SVC", MetricResult::Scalar(0.80), "2018-11-25T00:00:00Z"),
            run(5, "MLP", MetricResult::Scalar(0.89), "2019-01-01T00:00:00Z"),
        ]
    }

    #[test]
    fn selector_shorthands() {
        let r = &fixture()[2];
        let sel = |s: &str| s.parse::<FieldSelector>().unwrap();
        assert_eq!(
            sel("training_params.algorithm").resolve(r),
            Some(FieldValue::Text("MLP".into()))
        );
        assert_eq!(
            sel("training_params.batch_size").resolve(r),
            Some(FieldValue::Int(256))
        );
        assert_eq!(
            sel("results.accuracy").resolve(r),
            Some(FieldValue::Samples(vec![0.91, 0.92]))
        );
        assert_eq!(sel("context.code").resolve(r), Some(FieldValue::Int(3)));
        assert_eq!(
            sel("results.accuracy").canonical(),
            "results.metrics.accuracy"
        );
        assert_eq!(sel("results.nothing").resolve(r), None);
        assert_eq!(sel("no.such.path").resolve(r), None);
        assert!("a..b".parse::<FieldSelector>().is_err());
        assert!("".parse::<FieldSelector>().is_err());
    }

    #[test]
    fn filter_by_algorithm_and_date() {
        let recs = fixture();
        let p: Predicate = "training_params.algorithm = MLP".parse().unwrap();
        let codes: Vec<u64> = filter_records(&recs, &p).iter().map(|r| r.code).collect();
        assert_eq!(codes, vec![1, 3, 5]);

        let p: Predicate = "context.registered_at > 2018-11-24".parse().unwrap();
        let codes: Vec<u64> = filter_records(&recs, &p).iter().map(|r| r.code).collect();
        assert_eq!(codes, vec![2, 3, 4, 5]);

        assert_eq!(filter_records(&recs, &Predicate::all()).len(), 5);
    }

    #[test]
    fn operators() {
        let recs = fixture();
        let count = |s: &str| filter_records(&recs, &s.parse().unwrap()).len();
        assert_eq!(count("results.accuracy > 0.895"), 2);
        assert_eq!(count("results.accuracy < 0.85"), 1);
        assert_eq!(count("training_params.algorithm != MLP"), 2);
        assert_eq!(count("training_params.algorithm ~ LGBM"), 1);
        assert_eq!(count("results.model_ref ?"), 0);
        assert_eq!(count("results.model_ref !?"), 5);
        assert_eq!(count("results.model_ref = x"), 0);
        assert_eq!(count("results.model_ref != x"), 0);
        assert_eq!(
            count("training_params.batch_size = 256 training_params.algorithm = SVC"),
            1
        );
        assert_eq!(count("context.status = succeeded"), 5);
    }

    #[test]
    fn malformed_predicates() {
        assert!("results.accuracy".parse::<Predicate>().is_err());
        assert!("results.accuracy >".parse::<Predicate>().is_err());
        assert!("results.accuracy >> 1".parse::<Predicate>().is_err());
        assert!("results.accuracy > high".parse::<Predicate>().is_err());
        assert!("a = \"unterminated".parse::<Predicate>().is_err());
        let p: Predicate = r#"data_used.selection_criteria = "after 5/1/2018""#
            .parse()
            .unwrap();
        assert_eq!(p.atoms.len(), 1);
    }

    #[test]
    fn grouping() {
        let recs = fixture();
        let g = group_stats(
            &recs,
            &"training_params.algorithm".parse().unwrap(),
            &"results.accuracy".parse().unwrap(),
        );
        assert_eq!(g.groups.len(), 3);
        assert_eq!(g.groups["MLP"].n, 4);
        assert_eq!(g.groups["SVC"].sample_std, 0.0);
        assert_eq!(g.groups["SVC"].median, 0.80);
        assert_eq!(g.skipped, 0);

        let g = group_stats(
            &recs,
            &"training_params.algorithm".parse().unwrap(),
            &"results.loss".parse().unwrap(),
        );
        assert!(g.groups.is_empty());
        assert_eq!(g.skipped, 5);
    }

    #[test]
    fn ranking() {
        let recs = fixture();
        let acc: FieldSelector = "results.accuracy".parse().unwrap();
        let best = top_k(&recs, &acc, 1);
        assert_eq!(best[0].record.code, 3);
        assert!((best[0].score - 0.915).abs() < 1e-12);
        assert_eq!(top_k(&recs, &acc, 50).len(), 5);

        let mut tied = fixture();
        tied[4]
            .results
            .metrics
            .insert("accuracy".into(), MetricResult::Scalar(0.90));
        let order: Vec<u64> = top_k(&tied, &acc, 3)
            .iter()
            .map(|r| r.record.code)
            .collect();
        assert_eq!(order, vec![3, 1, 5]);
    }
}
