//! Browser bindings for a few trail computations. Every exported function
//! takes plain text from the page and returns a JSON string, or throws a
//! string error.

use std::collections::BTreeMap;

use rastro_core::metrics::{
    all_class_metrics, averaged_metrics, confusion_from_labels, AveragedMetrics, Averaging,
    ClassMetrics,
};
use rastro_core::synthesis::{monitor_performance, parse_series, MonitorReport};
use rastro_core::{summarize, SummaryStats};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ClassRow {
    pub class: String,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
    pub row: String,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub instances: usize,
    pub classes: Vec<ClassRow>,
    pub micro: AveragedMetrics,
    pub macro_avg: AveragedMetrics,
    pub weighted: AveragedMetrics,
}

fn labels(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

/// Per-class and averaged metrics from two label lists, one label per line.
pub fn metrics_from_labels(truth: &str, predicted: &str) -> Result<MetricsReport, String> {
    let (t, p) = (labels(truth), labels(predicted));
    if t.len() != p.len() {
        return Err(format!(
            "{} true labels but {} predictions",
            t.len(),
            p.len()
        ));
    }
    let mut classes: Vec<&str> = Vec::new();
    for l in t.iter().chain(&p) {
        if !classes.contains(l) {
            classes.push(l);
        }
    }
    let counts = confusion_from_labels(&t, &p, &classes).map_err(|e| e.to_string())?;
    let avg = |mode| averaged_metrics(&counts, mode).map_err(|e| e.to_string());
    let rows = all_class_metrics(&counts)
        .into_iter()
        .zip(&classes)
        .map(|(metrics, class)| ClassRow {
            class: class.to_string(),
            row: metrics.row(),
            metrics,
        })
        .collect();
    Ok(MetricsReport {
        instances: t.len(),
        classes: rows,
        micro: avg(Averaging::Micro)?,
        macro_avg: avg(Averaging::Macro)?,
        weighted: avg(Averaging::Weighted)?,
    })
}

#[derive(Debug, Serialize)]
pub struct GroupSummary {
    #[serde(flatten)]
    pub stats: SummaryStats,
    pub display: String,
}

/// Five-number summaries per group from `group,value` lines. A first line
/// whose value is not a number is taken as a header.
pub fn group_summaries(text: &str) -> Result<BTreeMap<String, GroupSummary>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        if row.len() != 2 {
            return Err(format!("line {}: expected group,value", i + 1));
        }
        match row[1].parse::<f64>() {
            Ok(v) if v.is_finite() => values.entry(row[0].to_string()).or_default().push(v),
            _ if i == 0 => continue,
            _ => return Err(format!("line {}: {:?} is not a number", i + 1, &row[1])),
        }
    }
    if values.is_empty() {
        return Err("no values".into());
    }
    values
        .into_iter()
        .map(|(group, vals)| {
            let stats = summarize(&vals).map_err(|e| e.to_string())?;
            Ok((
                group,
                GroupSummary {
                    display: stats.display_percent(),
                    stats,
                },
            ))
        })
        .collect()
}

/// Accuracy monitoring over `timestamp,accuracy` lines.
pub fn monitor_series(text: &str, baseline: f64, threshold: f64) -> Result<MonitorReport, String> {
    let series = parse_series(text).map_err(|e| e.to_string())?;
    monitor_performance(&series, baseline, threshold).map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = classMetrics)]
pub fn class_metrics_js(truth: &str, predicted: &str) -> Result<String, JsValue> {
    to_js(metrics_from_labels(truth, predicted))
}

#[wasm_bindgen(js_name = groupSummaries)]
pub fn group_summaries_js(text: &str) -> Result<String, JsValue> {
    to_js(group_summaries(text))
}

#[wasm_bindgen(js_name = monitorSeries)]
pub fn monitor_series_js(text: &str, baseline: f64, threshold: f64) -> Result<String, JsValue> {
    to_js(monitor_series(text, baseline, threshold))
}
