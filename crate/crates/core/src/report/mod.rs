//! Plain-text markdown documents rendered from the trail.
//!
//! Output is a pure function of the records: the same trail always renders to
//! the same bytes.

pub mod mlschema;

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::Result;
use crate::record::{
    ActionDefinition, ActionStatus, AnyRecord, Lesson, MetricResult, RecordKind, TrainingRecord,
};
use crate::stats::summarize;
use crate::store::TrailStore;
use crate::task::TaskRef;

pub use mlschema::{export_mlschema, import_mlschema, render_mlschema, FIELD_MAP};

const NONE_LINE: &str = "_none_\n";

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn stamp(ts: Option<crate::time::Timestamp>) -> String {
    ts.map_or_else(|| "-".to_string(), |t| t.to_string())
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn action_line(a: &ActionDefinition) -> String {
    let status = match a.status {
        ActionStatus::Defined => "",
        ActionStatus::Executed => " [executed]",
        ActionStatus::Abandoned => " [abandoned]",
    };
    let mut line = format!(
        "- {} action {}{status}: {}",
        stamp(a.registered_at),
        a.code,
        one_line(&a.description)
    );
    if let Some(r) = &a.resources {
        let _ = write!(line, " (resources: {})", one_line(r));
    }
    line
}

fn lesson_line(l: &Lesson) -> String {
    let mut line = format!(
        "- {} lesson {}: {}",
        stamp(l.registered_at),
        l.code,
        one_line(&l.description)
    );
    if !l.related_training_codes.is_empty() {
        let codes: Vec<String> = l
            .related_training_codes
            .iter()
            .map(u64::to_string)
            .collect();
        let _ = write!(line, " (trainings {})", codes.join(", "));
    }
    line
}

fn chronological<T, K: Ord>(items: &mut [T], key: impl Fn(&T) -> K) {
    items.sort_by_key(key);
}

/// Report for one task: its actions, its lessons, and a summary of the
/// trainings those lessons refer to.
pub fn render_task_report(
    task: &TaskRef,
    actions: &[ActionDefinition],
    lessons: &[Lesson],
    trainings: &[TrainingRecord],
) -> String {
    let mut actions: Vec<&ActionDefinition> = actions
        .iter()
        .filter(|a| a.task.as_ref() == Some(task))
        .collect();
    let mut lessons: Vec<&Lesson> = lessons
        .iter()
        .filter(|l| l.task.as_ref() == Some(task))
        .collect();
    chronological(&mut actions, |a| (a.registered_at, a.code));
    chronological(&mut lessons, |l| (l.registered_at, l.code));

    let mut out = String::new();
    let _ = writeln!(out, "# Task report: {}\n", task.task);
    let _ = writeln!(out, "Phase: {}\n", task.phase);

    out.push_str("## Action definitions\n\n");
    if actions.is_empty() {
        out.push_str(NONE_LINE);
    }
    for a in &actions {
        let _ = writeln!(out, "{}", action_line(a));
    }

    out.push_str("\n## Lessons learned\n\n");
    if lessons.is_empty() {
        out.push_str(NONE_LINE);
    }
    for l in &lessons {
        let _ = writeln!(out, "{}", lesson_line(l));
    }

    out.push_str("\n## Training summary\n\n");
    let mut codes: Vec<u64> = lessons
        .iter()
        .flat_map(|l| l.related_training_codes.iter().copied())
        .collect();
    codes.sort_unstable();
    codes.dedup();
    let linked: Vec<&TrainingRecord> = trainings
        .iter()
        .filter(|t| codes.binary_search(&t.code).is_ok())
        .collect();
    if linked.is_empty() {
        out.push_str("Trainings referenced by these lessons: none\n");
        return out;
    }
    let listed: Vec<String> = linked.iter().map(|t| t.code.to_string()).collect();
    let _ = writeln!(
        out,
        "Trainings referenced by these lessons: {} ({})\n",
        linked.len(),
        listed.join(", ")
    );

    // metric -> (training code, per-training mean)
    let mut per_metric: BTreeMap<&str, Vec<(u64, f64)>> = BTreeMap::new();
    for t in &linked {
        for (name, m) in &t.results.metrics {
            per_metric.entry(name).or_default().push((t.code, m.mean()));
        }
    }
    if per_metric.is_empty() {
        out.push_str("No metrics recorded.\n");
        return out;
    }
    out.push_str(
        "| metric | runs | best | best run | mean | std | min | q1 | median | q3 | max |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for (name, vals) in per_metric {
        let means: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let Ok(s) = summarize(&means) else { continue };
        let (best_code, best) = vals
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        let _ = writeln!(
            out,
            "| {name} | {} | {} | {best_code} | {} | {} | {} | {} | {} | {} | {} |",
            s.n,
            pct(best),
            pct(s.mean),
            pct(s.sample_std),
            pct(s.min),
            pct(s.q1),
            pct(s.median),
            pct(s.q3),
            pct(s.max)
        );
    }
    out
}

pub fn task_report(store: &TrailStore, task: &TaskRef) -> Result<String> {
    Ok(render_task_report(
        task,
        &store.scan::<ActionDefinition>()?,
        &store.scan::<Lesson>()?,
        &store.scan::<TrainingRecord>()?,
    ))
}

fn metric_display(m: &MetricResult) -> String {
    match m {
        MetricResult::Scalar(v) => pct(*v),
        MetricResult::Samples(s) => {
            summarize(s).map_or_else(|_| "-".into(), |st| st.display_percent())
        }
    }
}

/// One chronology entry, without the trailing newline.
pub fn chronology_line(r: &AnyRecord) -> String {
    let head = format!("- {} {} {}", stamp(r.registered_at()), r.kind(), r.code());
    let tag = |t: &Option<TaskRef>| t.as_ref().map_or_else(String::new, |t| format!(" [{t}]"));
    match r {
        AnyRecord::Action(a) => format!("{head}{}: {}", tag(&a.task), one_line(&a.description)),
        AnyRecord::Lesson(l) => format!("{head}{}: {}", tag(&l.task), one_line(&l.description)),
        AnyRecord::Training(t) => {
            let algo = if t.training_params.algorithm.is_empty() {
                "-"
            } else {
                &t.training_params.algorithm
            };
            let mut line = format!("{head}: {} {}", one_line(algo), t.context.status.as_str());
            if let Some(acc) = t.results.metrics.get("accuracy") {
                let _ = write!(line, ", accuracy {}", metric_display(acc));
            }
            line
        }
    }
}

/// Every record, ordered by timestamp, then kind (action, training, lesson),
/// then code.
pub fn render_chronology(records: &[AnyRecord]) -> String {
    let mut sorted: Vec<&AnyRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.registered_at(), r.kind(), r.code()));
    let mut out = String::from("# Chronology\n\n");
    if sorted.is_empty() {
        out.push_str(NONE_LINE);
    }
    for r in sorted {
        let _ = writeln!(out, "{}", chronology_line(r));
    }
    out
}

pub fn chronology(store: &TrailStore) -> Result<String> {
    let mut all = Vec::new();
    for kind in RecordKind::ALL {
        all.extend(store.scan_any(kind)?);
    }
    Ok(render_chronology(&all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::canonical_task;
    use crate::time::Timestamp;

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    #[test]
    fn empty_task_report_keeps_headers() {
        let doc = render_task_report(&canonical_task("Select Data").unwrap(), &[], &[], &[]);
        assert_eq!(
            doc,
            "# Task report: select data\n\nPhase: data-preparation\n\n## Action definitions\n\n_none_\n\n\
             ## Lessons learned\n\n_none_\n\n## Training summary\n\nTrainings referenced by these lessons: none\n"
        );
    }

    #[test]
    fn chronology_orders_by_time_then_kind() {
        let mut a = ActionDefinition::new("act").at(ts("2019-03-12T17:04:00Z"));
        a.code = 1;
        let mut l = Lesson::new("learn").at(ts("2019-03-12T17:04:00Z"));
        l.code = 1;
        let mut t = TrainingRecord {
            code: 7,
            registered_at: Some(ts("2019-03-12T17:04:00Z")),
            ..Default::default()
        };
        t.training_params.algorithm = "MLP".into();
        let mut early = Lesson::new("early").at(ts("2019-02-27T10:32:00Z"));
        early.code = 2;
        let doc = render_chronology(&[l.into(), t.into(), a.into(), early.into()]);
        let lines: Vec<&str> = doc.lines().skip(2).collect();
        assert_eq!(
            lines,
            vec![
                "- 2019-02-27T10:32:00Z lesson 2: early",
                "- 2019-03-12T17:04:00Z action 1: act",
                "- 2019-03-12T17:04:00Z training 7: MLP succeeded",
                "- 2019-03-12T17:04:00Z lesson 1: learn",
            ]
        );
    }

    #[test]
    fn summary_block_uses_linked_trainings() {
        let task = canonical_task("Select Data").unwrap();
        let mut t1 = TrainingRecord {
            code: 3,
            ..Default::default()
        };
        t1.results
            .metrics
            .insert("accuracy".into(), MetricResult::Scalar(0.86));
        let mut t2 = TrainingRecord {
            code: 4,
            ..Default::default()
        };
        t2.results
            .metrics
            .insert("accuracy".into(), MetricResult::Samples(vec![0.90, 0.92]));
        let mut l = Lesson::new("file names help")
            .with_task(task.clone())
            .at(ts("2019-03-29T09:54:00Z"));
        l.code = 1;
        l.related_training_codes = vec![3, 4];
        let doc = render_task_report(&task, &[], &[l], &[t1, t2]);
        assert!(doc.contains("- 2019-03-29T09:54:00Z lesson 1: file names help (trainings 3, 4)\n"));
        assert!(doc.contains("Trainings referenced by these lessons: 2 (3, 4)\n"));
        assert!(
            doc.contains("| accuracy | 2 | 91.0% | 4 | 88.5% |"),
            "{doc}"
        );
    }
}
