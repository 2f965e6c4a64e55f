//! Lesson candidates mined from the training trail, redundancy warnings for
//! new drafts, and accuracy monitoring of a deployed model.
//!
//! Candidates are proposals only. Turning one into a [`Lesson`] is an explicit
//! append by the caller with `origin = synthesized`.
//!
//! [`Lesson`]: crate::record::Lesson

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::query::{FieldSelector, Fields};
use crate::record::{ActionDefinition, AnyRecord, Lesson, RecordKind, TrainingRecord};
use crate::store::TrailStore;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    EqualMetrics,
    Improvement,
    BestSetting,
    Redundancy,
    Drift,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::EqualMetrics => "equal-metrics",
            CandidateKind::Improvement => "improvement",
            CandidateKind::BestSetting => "best-setting",
            CandidateKind::Redundancy => "redundancy",
            CandidateKind::Drift => "drift",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LessonCandidate {
    pub kind: CandidateKind,
    pub description: String,
    /// Training codes the candidate was derived from, ascending.
    pub evidence: Vec<u64>,
    pub confidence: String,
    /// What the candidate is about: metric names, setting values, record refs.
    pub subjects: Vec<String>,
    /// Deltas, margins or scores backing the description.
    pub points: Vec<f64>,
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn signed_points(p: f64) -> String {
    // avoid "-0.0" for tiny negative deltas
    let p = if p.abs() < 0.05 { 0.0 } else { p };
    format!("{p:+.1}")
}

fn sorted_codes(codes: impl IntoIterator<Item = u64>) -> Vec<u64> {
    codes
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn metrics_agree(a: &[f64], b: &[f64], tolerance: f64) -> bool {
    if a.len() == b.len() {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tolerance)
    } else {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        (mean(a) - mean(b)).abs() <= tolerance
    }
}

/// Metric pairs whose values agree within `tolerance` in every training that
/// records both (at least two such trainings).
pub fn detect_equal_metrics(records: &[TrainingRecord], tolerance: f64) -> Vec<LessonCandidate> {
    let names: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.results.metrics.keys().map(String::as_str))
        .collect();
    let names: Vec<&str> = names.into_iter().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let mut codes = Vec::new();
            let mut all_agree = true;
            for r in records {
                if let (Some(x), Some(y)) = (r.results.metrics.get(*a), r.results.metrics.get(*b)) {
                    codes.push(r.code);
                    if !metrics_agree(x.values(), y.values(), tolerance) {
                        all_agree = false;
                        break;
                    }
                }
            }
            if !all_agree || codes.len() < 2 {
                continue;
            }
            let n = codes.len();
            out.push(LessonCandidate {
                kind: CandidateKind::EqualMetrics,
                description: format!(
                    "Metrics {a} and {b} are equivalent: equal within {tolerance:e} in all {n} trainings that recorded both."
                ),
                evidence: sorted_codes(codes),
                confidence: format!("{n} of {n} co-occurring trainings agree"),
                subjects: vec![a.to_string(), b.to_string()],
                points: Vec::new(),
            });
        }
    }
    out
}

/// Flattened leaf paths of the settings that define an experiment: the
/// training parameters, the data used and the evaluation procedure.
fn setting_leaves(record: &TrainingRecord) -> BTreeMap<String, String> {
    fn walk(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    walk(&format!("{prefix}.{k}"), child, out);
                }
            }
            Value::Null => {}
            other => {
                out.insert(prefix.to_string(), other.to_string());
            }
        }
    }
    let mut out = BTreeMap::new();
    let v = record.fields();
    for key in ["training_params", "data_used"] {
        if let Some(child) = v.get(key) {
            walk(key, child, &mut out);
        }
    }
    if let Some(proc_) = v.pointer("/test_params/evaluation_procedure") {
        walk("test_params.evaluation_procedure", proc_, &mut out);
    }
    out
}

fn metric_mean(record: &TrainingRecord, metric: &FieldSelector) -> Option<f64> {
    metric
        .resolve(record)?
        .as_number()
        .filter(|x| x.is_finite())
}

fn group_mean(records: &[&TrainingRecord], metric: &FieldSelector) -> Option<f64> {
    let vals: Vec<f64> = records
        .iter()
        .filter_map(|r| metric_mean(r, metric))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Difference of group means, `to - from`, in percentage points.
pub fn group_delta_points(
    from: &[&TrainingRecord],
    to: &[&TrainingRecord],
    metric: &FieldSelector,
) -> Option<f64> {
    Some((group_mean(to, metric)? - group_mean(from, metric)?) * 100.0)
}

const ABSENT: &str = "(absent)";

/// For groups of trainings identical in every setting except `varied_key`,
/// report how the mean of `metric` moved between the values of `varied_key`.
/// Deltas smaller than `min_delta_points` are not reported.
pub fn attribute_improvement(
    records: &[TrainingRecord],
    varied_key: &FieldSelector,
    metric: &FieldSelector,
    min_delta_points: f64,
) -> Vec<LessonCandidate> {
    let varied_path = varied_key.canonical();
    let under_varied =
        |path: &str| path == varied_path || path.starts_with(&format!("{varied_path}."));

    // signature of the other settings -> varied value -> records
    let mut groups: BTreeMap<String, BTreeMap<String, Vec<&TrainingRecord>>> = BTreeMap::new();
    for r in records {
        if metric_mean(r, metric).is_none() {
            continue;
        }
        let signature: Vec<String> = setting_leaves(r)
            .into_iter()
            .filter(|(path, _)| !under_varied(path))
            .map(|(path, value)| format!("{path}={value}"))
            .collect();
        let value = varied_key
            .resolve(r)
            .map_or_else(|| ABSENT.to_string(), |v| v.to_string());
        groups
            .entry(signature.join("\n"))
            .or_default()
            .entry(value)
            .or_default()
            .push(r);
    }

    let mut out = Vec::new();
    for by_value in groups.values() {
        let values: Vec<(&String, &Vec<&TrainingRecord>)> = by_value.iter().collect();
        for (i, (from_label, from)) in values.iter().enumerate() {
            for (to_label, to) in &values[i + 1..] {
                let Some(delta) = group_delta_points(from, to, metric) else {
                    continue;
                };
                if delta.abs() < min_delta_points {
                    continue;
                }
                let (mf, mt) = (
                    group_mean(from, metric).unwrap(),
                    group_mean(to, metric).unwrap(),
                );
                let direction = if delta > 0.0 { "improved" } else { "worsened" };
                out.push(LessonCandidate {
                    kind: CandidateKind::Improvement,
                    description: format!(
                        "Changing {varied_key} from {from_label} to {to_label} {direction} {metric} by {} points ({} to {}).",
                        signed_points(delta),
                        pct(mf),
                        pct(mt)
                    ),
                    evidence: sorted_codes(from.iter().chain(to.iter()).map(|r| r.code)),
                    confidence: format!(
                        "{} vs {} trainings with otherwise identical settings",
                        from.len(),
                        to.len()
                    ),
                    subjects: vec![(*from_label).clone(), (*to_label).clone()],
                    points: vec![delta],
                });
            }
        }
    }
    out
}

/// The value of `param` with the highest mean `metric`, with its margins over
/// the other values. Means within `tolerance` of the best are a tie, and a tie
/// declares no winner. `None` when fewer than two values were tried.
pub fn best_setting(
    records: &[TrainingRecord],
    param: &FieldSelector,
    metric: &FieldSelector,
    tolerance: f64,
) -> Option<LessonCandidate> {
    let mut by_value: BTreeMap<String, Vec<&TrainingRecord>> = BTreeMap::new();
    for r in records {
        if metric_mean(r, metric).is_none() {
            continue;
        }
        if let Some(v) = param.resolve(r) {
            by_value.entry(v.to_string()).or_default().push(r);
        }
    }
    if by_value.len() < 2 {
        return None;
    }
    let mut ranked: Vec<(String, f64, Vec<u64>)> = by_value
        .into_iter()
        .map(|(label, recs)| {
            let mean = group_mean(&recs, metric).expect("groups only hold records with the metric");
            (label, mean, recs.iter().map(|r| r.code).collect())
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let evidence = sorted_codes(ranked.iter().flat_map(|g| g.2.iter().copied()));
    let confidence = ranked
        .iter()
        .map(|(l, _, c)| format!("{l}: {} trainings", c.len()))
        .collect::<Vec<_>>()
        .join(", ");
    let best = ranked[0].1;
    let tied: Vec<&str> = ranked
        .iter()
        .filter(|g| best - g.1 <= tolerance)
        .map(|g| g.0.as_str())
        .collect();

    if tied.len() > 1 {
        return Some(LessonCandidate {
            kind: CandidateKind::BestSetting,
            description: format!(
                "No single best {param}: {} tie on mean {metric} ({}).",
                tied.join(" and "),
                pct(best)
            ),
            evidence,
            confidence,
            subjects: tied.iter().map(|s| s.to_string()).collect(),
            points: Vec::new(),
        });
    }

    let margins: Vec<f64> = ranked[1..].iter().map(|g| (best - g.1) * 100.0).collect();
    let behind = ranked[1..]
        .iter()
        .zip(&margins)
        .map(|(g, m)| format!("{} by {m:.1} points", g.0))
        .collect::<Vec<_>>()
        .join(", ");
    Some(LessonCandidate {
        kind: CandidateKind::BestSetting,
        description: format!(
            "{} was the best {param} so far (mean {metric} {}), ahead of {behind}.",
            ranked[0].0,
            pct(best)
        ),
        evidence,
        confidence,
        subjects: ranked.iter().map(|g| g.0.clone()).collect(),
        points: margins,
    })
}

/// Lowercased alphanumeric tokens; everything else separates tokens.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard similarity of the token sets of two texts.
pub fn similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyMatch {
    pub kind: RecordKind,
    pub code: u64,
    pub description: String,
    pub similarity: f64,
}

impl RedundancyMatch {
    pub fn to_candidate(&self) -> LessonCandidate {
        LessonCandidate {
            kind: CandidateKind::Redundancy,
            description: format!(
                "Draft resembles {} {} ({:.2} similar): {}",
                self.kind, self.code, self.similarity, self.description
            ),
            evidence: Vec::new(),
            confidence: format!("token Jaccard similarity {:.2}", self.similarity),
            subjects: vec![format!("{}:{}", self.kind, self.code)],
            points: vec![self.similarity],
        }
    }
}

/// Existing actions and lessons similar to `draft`, most similar first.
pub fn redundancy_in(records: &[AnyRecord], draft: &str, threshold: f64) -> Vec<RedundancyMatch> {
    let mut out: Vec<RedundancyMatch> = records
        .iter()
        .filter_map(|r| {
            let description = match r {
                AnyRecord::Action(a) => &a.description,
                AnyRecord::Lesson(l) => &l.description,
                AnyRecord::Training(_) => return None,
            };
            let s = similarity(draft, description);
            (s >= threshold && s > 0.0).then(|| RedundancyMatch {
                kind: r.kind(),
                code: r.code(),
                description: description.clone(),
                similarity: s,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.kind.cmp(&b.kind))
            .then(a.code.cmp(&b.code))
    });
    out
}

pub fn redundancy_warning(
    store: &TrailStore,
    draft: &str,
    threshold: f64,
) -> Result<Vec<RedundancyMatch>> {
    let mut records: Vec<AnyRecord> = store
        .scan::<ActionDefinition>()?
        .into_iter()
        .map(Into::into)
        .collect();
    records.extend(store.scan::<Lesson>()?.into_iter().map(AnyRecord::from));
    Ok(redundancy_in(&records, draft, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub timestamp: Timestamp,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HealthStatus {
    Healthy,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub status: HealthStatus,
    pub baseline: f64,
    pub drop_threshold: f64,
    /// Points strictly below `baseline - drop_threshold`, in input order.
    pub flagged: Vec<EvalPoint>,
    pub message: String,
}

impl MonitorReport {
    pub fn to_candidate(&self) -> Option<LessonCandidate> {
        (self.status == HealthStatus::Degraded).then(|| LessonCandidate {
            kind: CandidateKind::Drift,
            description: self.message.clone(),
            evidence: Vec::new(),
            confidence: format!("{} flagged evaluations", self.flagged.len()),
            subjects: self
                .flagged
                .iter()
                .map(|p| p.timestamp.to_string())
                .collect(),
            points: self
                .flagged
                .iter()
                .map(|p| (self.baseline - p.accuracy) * 100.0)
                .collect(),
        })
    }
}

/// Flag evaluations whose accuracy fell more than `drop_threshold` below
/// `baseline`.
pub fn monitor_performance(
    series: &[EvalPoint],
    baseline: f64,
    drop_threshold: f64,
) -> Result<MonitorReport> {
    if series.is_empty() {
        return Err(Error::InsufficientData("empty evaluation series".into()));
    }
    if !(baseline.is_finite() && drop_threshold.is_finite() && drop_threshold >= 0.0) {
        return Err(Error::invalid(
            "baseline and threshold must be finite, threshold non-negative",
        ));
    }
    if let Some(p) = series.iter().find(|p| !(0.0..=1.0).contains(&p.accuracy)) {
        return Err(Error::invalid(format!(
            "accuracy {} at {} is outside [0, 1]",
            p.accuracy, p.timestamp
        )));
    }
    let floor = baseline - drop_threshold;
    let flagged: Vec<EvalPoint> = series
        .iter()
        .copied()
        .filter(|p| p.accuracy < floor)
        .collect();
    let (status, message) = if flagged.is_empty() {
        (
            HealthStatus::Healthy,
            format!(
                "healthy: all {} evaluations at or above {}",
                series.len(),
                pct(floor)
            ),
        )
    } else {
        let worst = flagged
            .iter()
            .map(|p| p.accuracy)
            .fold(f64::INFINITY, f64::min);
        (
            HealthStatus::Degraded,
            format!(
                "degraded: {} of {} evaluations below {} (baseline {} minus {:.1} points), worst {}; regenerate the model on recent data",
                flagged.len(),
                series.len(),
                pct(floor),
                pct(baseline),
                drop_threshold * 100.0,
                pct(worst)
            ),
        )
    };
    Ok(MonitorReport {
        status,
        baseline,
        drop_threshold,
        flagged,
        message,
    })
}

/// Parse `timestamp,accuracy` rows. A leading header row is allowed.
pub fn parse_series(text: &str) -> Result<Vec<EvalPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::invalid(format!("series row {}: {e}", i + 1)))?;
        if row.len() != 2 {
            return Err(Error::invalid(format!(
                "series row {}: expected timestamp,accuracy",
                i + 1
            )));
        }
        let parsed = row[0]
            .parse::<Timestamp>()
            .ok()
            .zip(row[1].parse::<f64>().ok().filter(|x| x.is_finite()));
        match parsed {
            Some((timestamp, accuracy)) => out.push(EvalPoint {
                timestamp,
                accuracy,
            }),
            None if i == 0 => continue,
            None => {
                return Err(Error::invalid(format!(
                    "series row {}: cannot read {:?},{:?}",
                    i + 1,
                    &row[0],
                    &row[1]
                )))
            }
        }
    }
    Ok(out)
}
