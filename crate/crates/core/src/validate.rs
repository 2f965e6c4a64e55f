//! Record validation. Violations are data: each names the offending field by
//! its dotted path in the serialized record.

use std::fmt;

use serde::Serialize;

use crate::record::{
    ActionDefinition, EvaluationProcedure, HyperValue, Lesson, MetricResult, TrainingRecord,
    TrainingStatus,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn join(list: &[Violation]) -> String {
        list.iter()
            .map(Violation::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

pub fn validate_action(action: &ActionDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    if blank(&action.description) {
        out.push(Violation::new("description", "must not be empty"));
    }
    if action.task.as_ref().is_some_and(|t| blank(&t.task)) {
        out.push(Violation::new("task.task", "must not be empty"));
    }
    out
}

/// Checks the record-local lesson invariants. Whether the related training
/// codes exist is checked by the store at append time.
pub fn validate_lesson(lesson: &Lesson) -> Vec<Violation> {
    let mut out = Vec::new();
    if blank(&lesson.description) {
        out.push(Violation::new("description", "must not be empty"));
    }
    if lesson.task.as_ref().is_some_and(|t| blank(&t.task)) {
        out.push(Violation::new("task.task", "must not be empty"));
    }
    if lesson.related_training_codes.contains(&0) {
        out.push(Violation::new(
            "related_training_codes",
            "training codes start at 1",
        ));
    }
    out
}

/// Every violated training-record invariant, with its field path.
pub fn validate_training(record: &TrainingRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let ctx = &record.context;

    if matches!(
        ctx.status,
        TrainingStatus::Failed | TrainingStatus::Interrupted
    ) && ctx.error_message.as_deref().is_none_or(blank)
    {
        out.push(Violation::new(
            "context.error_message",
            format!("required when status is {}", ctx.status.as_str()),
        ));
    }
    if !ctx.duration_seconds.is_finite() || ctx.duration_seconds < 0.0 {
        out.push(Violation::new(
            "context.duration_seconds",
            "must be a finite non-negative number",
        ));
    }

    for (name, value) in &record.training_params.hyperparameters {
        if let HyperValue::Real(r) = value {
            if !r.is_finite() {
                out.push(Violation::new(
                    format!("training_params.hyperparameters.{name}"),
                    "real value must be finite",
                ));
            }
        }
    }

    let expected_samples = match record.test_params.evaluation_procedure {
        Some(EvaluationProcedure::Holdout { fraction, .. }) => {
            if !(fraction > 0.0 && fraction < 1.0) {
                out.push(Violation::new(
                    "test_params.evaluation_procedure.fraction",
                    "must lie strictly between 0 and 1",
                ));
            }
            None
        }
        Some(EvaluationProcedure::CrossValidation {
            partitions,
            repetitions,
        }) => {
            if partitions < 2 {
                out.push(Violation::new(
                    "test_params.evaluation_procedure.partitions",
                    "cross-validation needs at least 2 partitions",
                ));
            }
            if repetitions < 1 {
                out.push(Violation::new(
                    "test_params.evaluation_procedure.repetitions",
                    "must be at least 1",
                ));
            }
            Some(partitions as usize * repetitions as usize)
        }
        None => None,
    };

    for (name, metric) in &record.results.metrics {
        let path = format!("results.metrics.{name}");
        if blank(name) {
            out.push(Violation::new(
                "results.metrics",
                "metric name must not be empty",
            ));
        }
        if metric.values().iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(path.clone(), "values must be finite"));
        }
        if let MetricResult::Samples(samples) = metric {
            if samples.is_empty() {
                out.push(Violation::new(
                    path.clone(),
                    "sample list must not be empty",
                ));
            } else if let Some(n) = expected_samples {
                if samples.len() != n {
                    out.push(Violation::new(
                        path,
                        format!(
                            "cross-validation expects {n} samples, found {}",
                            samples.len()
                        ),
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::*;
    use proptest::prelude::*;

    fn cv_record() -> TrainingRecord {
        let mut r = TrainingRecord::default();
        r.test_params.evaluation_procedure = Some(EvaluationProcedure::CrossValidation {
            partitions: 7,
            repetitions: 2,
        });
        r.results
            .metrics
            .insert("accuracy".into(), MetricResult::Samples(vec![0.911; 14]));
        r
    }

    #[test]
    fn failed_without_message() {
        let mut r = TrainingRecord::default();
        r.context.status = TrainingStatus::Failed;
        let v = validate_training(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "context.error_message");
        r.context.error_message = Some("out of memory".into());
        assert!(validate_training(&r).is_empty());
    }

    #[test]
    fn cross_validation_with_fourteen_samples_is_valid() {
        assert!(validate_training(&cv_record()).is_empty());
        let mut r = cv_record();
        r.results
            .metrics
            .insert("accuracy".into(), MetricResult::Samples(vec![0.9; 13]));
        assert_eq!(validate_training(&r)[0].path, "results.metrics.accuracy");
    }

    #[test]
    fn minimal_record_is_valid() {
        let mut r = TrainingRecord::default();
        r.results
            .metrics
            .insert("accuracy".into(), MetricResult::Scalar(0.5));
        assert!(validate_training(&r).is_empty());
    }

    #[test]
    fn action_and_lesson_need_text() {
        assert_eq!(validate_action(&ActionDefinition::new("  ")).len(), 1);
        assert!(validate_action(&ActionDefinition::new("x")).is_empty());
        assert_eq!(validate_lesson(&Lesson::new("")).len(), 1);
    }

    fn arb_valid() -> impl Strategy<Value = TrainingRecord> {
        (
            1u32..=5,
            1u32..=3,
            prop::collection::vec(0.0f64..1.0, 1..4),
            0.0f64..1000.0,
            any::<bool>(),
            0u64..100,
        )
            .prop_flat_map(|(p, r, scalars, dur, use_cv, epochs)| {
                let n = (p + 1) as usize * r as usize;
                prop::collection::vec(0.0f64..1.0, n).prop_map(move |samples| {
                    let mut rec = TrainingRecord::default();
                    rec.context.epochs = epochs;
                    rec.context.duration_seconds = dur;
                    rec.test_params.evaluation_procedure = Some(if use_cv {
                        EvaluationProcedure::CrossValidation {
                            partitions: p + 1,
                            repetitions: r,
                        }
                    } else {
                        EvaluationProcedure::Holdout {
                            fraction: 0.2,
                            stratified: true,
                        }
                    });
                    for (i, s) in scalars.iter().enumerate() {
                        rec.results
                            .metrics
                            .insert(format!("m{i}"), MetricResult::Scalar(*s));
                    }
                    rec.results
                        .metrics
                        .insert("cv".into(), MetricResult::Samples(samples.clone()));
                    rec.training_params
                        .hyperparameters
                        .insert("lr".into(), HyperValue::Real(scalars[0]));
                    rec
                })
            })
    }

    fn mutate(mut rec: TrainingRecord, which: u8) -> TrainingRecord {
        match which % 8 {
            0 => rec.context.status = TrainingStatus::Failed,
            1 => {
                rec.context.status = TrainingStatus::Interrupted;
                rec.context.error_message = Some("   ".into());
            }
            2 => rec.context.duration_seconds = -1.0,
            3 => {
                rec.results
                    .metrics
                    .insert("m0".into(), MetricResult::Scalar(f64::NAN));
            }
            4 => {
                rec.results
                    .metrics
                    .insert("cv".into(), MetricResult::Samples(vec![]));
            }
            5 => {
                rec.training_params
                    .hyperparameters
                    .insert("lr".into(), HyperValue::Real(f64::INFINITY));
            }
            6 => {
                // one sample too many for any cross-validation shape, or a bad holdout fraction
                match rec.test_params.evaluation_procedure {
                    Some(EvaluationProcedure::CrossValidation { .. }) => {
                        if let Some(MetricResult::Samples(s)) = rec.results.metrics.get_mut("cv") {
                            s.push(0.5);
                        }
                    }
                    _ => {
                        rec.test_params.evaluation_procedure = Some(EvaluationProcedure::Holdout {
                            fraction: 1.5,
                            stratified: false,
                        })
                    }
                }
            }
            _ => {
                rec.test_params.evaluation_procedure = Some(EvaluationProcedure::CrossValidation {
                    partitions: 1,
                    repetitions: 0,
                })
            }
        }
        rec
    }

    proptest! {
        #[test]
        fn valid_records_have_no_violations(rec in arb_valid()) {
            prop_assert!(validate_training(&rec).is_empty());
        }

        #[test]
        fn any_mutation_is_reported(rec in arb_valid(), which in 0u8..8) {
            let before = rec.clone();
            let mutated = mutate(rec, which);
            prop_assert!(!validate_training(&mutated).is_empty());
            prop_assert!(validate_training(&before).is_empty());
        }
    }
}
