//! A sample trail taken from a real document-classifier project: its action
//! definitions, lessons learned, and the test and generation trainings of the
//! deployed model. Used by the demo, the CLI tests and the golden reports.
//!
//! Registration times are the project's local times, stored as UTC.

use crate::error::Result;
use crate::record::{
    ActionDefinition, EvaluationProcedure, HyperValue, Lesson, MetricResult, TrainingRecord,
};
use crate::store::TrailStore;
use crate::task::canonical_task;
use crate::time::Timestamp;

pub const ACTIONS: &[(&str, &str, &str)] = &[
    ("2019-03-12T17:04:00Z", "Creating a structure (code and data) for processing k-fold in shallow algorithms", "Project of tests"),
    ("2019-03-14T19:27:00Z", "Initiated the executions to experiment optimizers (MLP): nadam, adadelta", "Construct Model"),
    ("2019-03-18T11:40:00Z", "Experimenting with MLP columns no longer binary", "Format Data"),
    ("2019-03-26T11:57:00Z", "Initiating the inclusion of names of files in the model", "Select Data"),
    ("2019-05-29T19:30:00Z", "Program modified (shallow) to also record recall and f1-micro", "Project of tests"),
    ("2019-06-04T19:35:00Z", "Program modified (shallow) to not record recall and f1-micro, because they are equivalent to accuracy (and to precision)", "Project of tests"),
];

pub const LESSONS: &[(&str, &str, &str)] = &[
    ("2019-02-27T10:32:00Z", "The variables of context and PDF quality are enough to achieve a result of 44% accuracy, with optimizer Adam. With Adagrad:42%; SGD:28%.", "Select Data"),
    ("2019-02-27T10:39:00Z", "By using pca (sklearn): it is best to separate the fit command from the transform command. The fit_transform command was locking!", "Format Data"),
    ("2019-02-27T10:53:00Z", "By using pca (sklearn): if the number of dimensions is very small and the array is wide (see details in the documentation of function), it is better to use the randomized method rather than the full method, because it is faster and the results (variance achieved) are equivalent.", "Format Data"),
    ("2019-03-29T09:54:00Z", "An improvement of approximately 5% in the accuracy of the models was noticed after including the file name as an attribute.", "Select Data"),
    ("2019-04-01T15:36:00Z", "For shallow algorithms, the extra columns with no dummy values (one only column with various discrete values) led to a better result. For a Neural Networks, there is a slight improvement using dummy values.", "Format Data"),
    ("2019-04-10T10:49:00Z", "In multiclass classification, the metrics referring to f1_micro, recall_micro, precision_micro and accuracy are equivalent.", "Project of tests"),
    ("2019-05-22T20:04:00Z", "The Adam optimizer (passing object with Amsgrad=False) was the best optimizer so far. Better than the Amsgrad=True in 0.1%, and than the Rmsprop and the Adadelta in 0.2% in the context evaluated in the last executions.", "Construct Model"),
];

fn ts(s: &str) -> Timestamp {
    s.parse().expect("sample timestamps are valid")
}

/// `n` values alternating around `mean` whose sample standard deviation is `std`.
pub fn spread_samples(mean: f64, std: f64, n: usize) -> Vec<f64> {
    let half = n / 2;
    let d = if n.is_multiple_of(2) {
        std * ((n - 1) as f64 / n as f64).sqrt()
    } else {
        // odd n: the middle value sits at the mean
        std * ((n - 1) as f64 / (2 * half) as f64).sqrt()
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..half {
        out.push(mean + d);
        out.push(mean - d);
    }
    if n % 2 == 1 {
        out.push(mean);
    }
    out
}

pub fn actions() -> Vec<ActionDefinition> {
    ACTIONS
        .iter()
        .map(|(at, text, task)| {
            ActionDefinition::new(*text)
                .at(ts(at))
                .with_task(canonical_task(task).expect("non-empty"))
        })
        .collect()
}

pub fn lessons() -> Vec<Lesson> {
    LESSONS
        .iter()
        .map(|(at, text, task)| {
            Lesson::new(*text)
                .at(ts(at))
                .with_task(canonical_task(task).expect("non-empty"))
        })
        .collect()
}

fn shared_settings(r: &mut TrainingRecord) {
    r.configuration.program_id = "Cladop_monitoramento.ipynb".into();
    r.data_used.dataset_description = "PDF documents of special-account audits".into();
    r.data_used.selection_criteria =
        Some("Documents of a different type from Others and created after 5/1/2018".into());
    r.data_used.record_count = Some(63_468);
    r.data_used.class_count = Some(81);
    r.training_params.algorithm = "MLP".into();
    let hp = &mut r.training_params.hyperparameters;
    hp.insert("text_vectorizer".into(), HyperValue::Text("Tfidf".into()));
    hp.insert("content_vocabulary_size".into(), HyperValue::Int(24_576));
    hp.insert("filename_vocabulary_size".into(), HyperValue::Int(1_000));
    hp.insert("preprocessing_method".into(), HyperValue::Int(7));
    hp.insert("optimizer".into(), HyperValue::Text("Adam".into()));
    hp.insert("batch_size".into(), HyperValue::Int(256));
    hp.insert("min_documents_per_type".into(), HyperValue::Int(0));
    hp.insert("content_vector_dimension".into(), HyperValue::Int(768));
    hp.insert(
        "dimension_reduction".into(),
        HyperValue::Text("TruncatedSVD".into()),
    );
    hp.insert("shuffle_each_epoch".into(), HyperValue::Bool(false));
}

/// The cross-validated test run of the deployed model (7 partitions, 2 repetitions).
pub fn test_training() -> TrainingRecord {
    let mut r = TrainingRecord {
        registered_at: Some(ts("2019-07-05T00:44:59Z")),
        ..Default::default()
    };
    shared_settings(&mut r);
    r.context.epochs = 33;
    r.context.duration_seconds = 460.0;
    r.test_params.evaluation_procedure = Some(EvaluationProcedure::CrossValidation {
        partitions: 7,
        repetitions: 2,
    });
    r.test_params.metric_names = vec![
        "accuracy".into(),
        "train_accuracy".into(),
        "val_accuracy".into(),
    ];
    let m = &mut r.results.metrics;
    m.insert(
        "accuracy".into(),
        MetricResult::Samples(spread_samples(0.911, 0.003, 14)),
    );
    m.insert(
        "train_accuracy".into(),
        MetricResult::Samples(spread_samples(0.964, 0.007, 14)),
    );
    m.insert(
        "val_accuracy".into(),
        MetricResult::Samples(spread_samples(0.908, 0.006, 14)),
    );
    r
}

/// The run that generated the deployed model: no test split, 5% validation
/// without stratification.
pub fn generation_training() -> TrainingRecord {
    let mut r = TrainingRecord {
        registered_at: Some(ts("2019-07-05T18:02:12Z")),
        ..Default::default()
    };
    shared_settings(&mut r);
    r.context.epochs = 24;
    r.context.duration_seconds = 475.0;
    r.test_params.evaluation_procedure = Some(EvaluationProcedure::Holdout {
        fraction: 0.05,
        stratified: false,
    });
    r.test_params.metric_names = vec!["accuracy".into(), "train_accuracy".into()];
    r.results
        .metrics
        .insert("accuracy".into(), MetricResult::Scalar(0.921));
    r.results
        .metrics
        .insert("train_accuracy".into(), MetricResult::Scalar(0.956));
    r.results.model_ref = Some("models/cladop-2.1".into());
    r
}

/// Append the whole sample trail to `store`.
pub fn populate(store: &mut TrailStore) -> Result<()> {
    for a in actions() {
        store.append(a)?;
    }
    for l in lessons() {
        store.append(l)?;
    }
    store.append(test_training())?;
    store.append(generation_training())?;
    Ok(())
}

fn run(algorithm: &str, acc: f64) -> TrainingRecord {
    let mut r = TrainingRecord::default();
    r.training_params.algorithm = algorithm.into();
    r.results
        .metrics
        .insert("accuracy".into(), MetricResult::Scalar(acc));
    r
}

/// Test accuracy per algorithm over a parameter sweep: MLP best, LGBMClassifier
/// about two points behind, then the shallower models.
pub fn algorithm_sweep() -> Vec<TrainingRecord> {
    let sweep: &[(&str, &[f64])] = &[
        ("MLP", &[0.905, 0.911, 0.899, 0.913, 0.907, 0.887]),
        (
            "LGBMClassifier",
            &[0.884, 0.892, 0.879, 0.890, 0.886, 0.865],
        ),
        ("LinearSVC", &[0.861, 0.842, 0.855, 0.790, 0.848]),
        ("RandomForestClassifier", &[0.823, 0.781, 0.809, 0.836]),
    ];
    sweep
        .iter()
        .flat_map(|(algo, accs)| accs.iter().map(move |a| run(algo, *a)))
        .collect()
}

/// Ten runs in which `f1_micro`, `recall_micro`, `precision_micro` and
/// `accuracy` coincide while the macro averages do not.
pub fn equal_metric_runs() -> Vec<TrainingRecord> {
    (0..10)
        .map(|i| {
            let acc = 0.842 + 0.007 * i as f64;
            let mut r = run("LinearSVC", acc);
            let m = &mut r.results.metrics;
            m.insert("f1_micro".into(), MetricResult::Scalar(acc));
            m.insert(
                "f1_macro".into(),
                MetricResult::Scalar(acc - 0.093 + 0.002 * (i % 3) as f64),
            );
            r
        })
        .collect()
}

/// Identical runs apart from whether the file name is a feature.
pub fn filename_runs() -> Vec<TrainingRecord> {
    let mut out = Vec::new();
    for (flag, accs) in [
        (false, [0.857, 0.861, 0.862]),
        (true, [0.908, 0.911, 0.911]),
    ] {
        for a in accs {
            let mut r = run("MLP", a);
            r.training_params
                .hyperparameters
                .insert("uses_filename".into(), HyperValue::Bool(flag));
            r.training_params
                .hyperparameters
                .insert("batch_size".into(), HyperValue::Int(256));
            out.push(r);
        }
    }
    out
}

/// Optimizer comparison: Adam 91.1%, Adam with amsgrad 91.0%, Rmsprop 90.9%.
pub fn optimizer_runs() -> Vec<TrainingRecord> {
    let groups: &[(&str, &[f64])] = &[
        ("Adam", &[0.912, 0.910]),
        ("Adam(amsgrad=True)", &[0.911, 0.909]),
        ("Rmsprop", &[0.908, 0.910]),
    ];
    groups
        .iter()
        .flat_map(|(opt, accs)| {
            accs.iter().map(move |a| {
                let mut r = run("MLP", *a);
                r.training_params
                    .hyperparameters
                    .insert("optimizer".into(), HyperValue::Text(opt.to_string()));
                r
            })
        })
        .collect()
}

/// Give records consecutive codes starting at 1, as a fresh store would.
pub fn numbered(mut records: Vec<TrainingRecord>) -> Vec<TrainingRecord> {
    for (i, r) in records.iter_mut().enumerate() {
        r.code = i as u64 + 1;
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::summarize;

    #[test]
    fn spread_hits_mean_and_std() {
        for n in [2, 5, 14] {
            let s = summarize(&spread_samples(0.911, 0.003, n)).unwrap();
            assert!((s.mean - 0.911).abs() < 1e-12);
            assert!(
                (s.sample_std - 0.003).abs() < 1e-12,
                "n={n}: {}",
                s.sample_std
            );
        }
    }

    #[test]
    fn sample_records_are_valid() {
        for r in [test_training(), generation_training()] {
            assert!(crate::validate::validate_training(&r).is_empty());
        }
        assert_eq!(actions().len(), 6);
        assert_eq!(lessons().len(), 7);
    }
}
