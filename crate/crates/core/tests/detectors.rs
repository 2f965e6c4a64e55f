use rastro_core::query::{filter_records, group_stats, top_k, FieldSelector, Predicate};
use rastro_core::record::{AnyRecord, TrainingRecord};
use rastro_core::sample;
use rastro_core::synthesis::*;

fn sel(s: &str) -> FieldSelector {
    s.parse().unwrap()
}

#[test]
fn equal_metrics_on_ten_runs() {
    let runs = sample::numbered(sample::equal_metric_runs());
    let c = detect_equal_metrics(&runs, 1e-9);
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].kind, CandidateKind::EqualMetrics);
    assert_eq!(c[0].evidence, (1..=10).collect::<Vec<_>>());
    assert!(c[0].subjects.contains(&"accuracy".to_string()));
    assert!(c[0].subjects.contains(&"f1_micro".to_string()));
}

#[test]
fn filename_flag_improves_five_points() {
    let runs = sample::numbered(sample::filename_runs());
    let c = attribute_improvement(
        &runs,
        &sel("training_params.uses_filename"),
        &sel("results.accuracy"),
        0.5,
    );
    assert_eq!(c.len(), 1);
    assert!((c[0].points[0] - 5.0).abs() < 0.05, "{}", c[0].points[0]);
    assert!(
        c[0].description.contains("+5.0 points"),
        "{}",
        c[0].description
    );
}

#[test]
fn improvement_is_antisymmetric() {
    let runs = sample::numbered(sample::filename_runs());
    let (off, on): (Vec<&TrainingRecord>, Vec<&TrainingRecord>) =
        runs.iter().partition(|r| r.code <= 3);
    let m = sel("results.accuracy");
    let up = group_delta_points(&off, &on, &m).unwrap();
    let down = group_delta_points(&on, &off, &m).unwrap();
    assert!((up + down).abs() < 1e-12);
}

#[test]
fn adam_wins_by_one_and_two_tenths() {
    let runs = sample::numbered(sample::optimizer_runs());
    let c = best_setting(
        &runs,
        &sel("training_params.optimizer"),
        &sel("results.accuracy"),
        1e-9,
    )
    .unwrap();
    assert_eq!(c.subjects[0], "Adam");
    assert_eq!(c.points.len(), 2);
    assert!(
        (c.points[0] - 0.1).abs() < 1e-9 && (c.points[1] - 0.2).abs() < 1e-9,
        "{:?}",
        c.points
    );
    assert!(c.description.contains("by 0.1 points") && c.description.contains("by 0.2 points"));
}

#[test]
fn redundancy_on_lesson_redraft() {
    let records: Vec<AnyRecord> = sample::lessons()
        .into_iter()
        .enumerate()
        .map(|(i, mut l)| {
            l.code = i as u64 + 1;
            l.into()
        })
        .collect();
    let draft = "In multiclass classification the f1_micro, recall_micro, precision_micro and accuracy metrics are equivalent";
    let hits = redundancy_in(&records, draft, 0.5);
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].code, 6);
    assert!(hits[0].similarity >= 0.5);
}

#[test]
fn detectors_are_deterministic() {
    let once = || {
        let eq = detect_equal_metrics(&sample::numbered(sample::equal_metric_runs()), 1e-9);
        let imp = attribute_improvement(
            &sample::numbered(sample::filename_runs()),
            &sel("training_params.uses_filename"),
            &sel("results.accuracy"),
            0.5,
        );
        let best = best_setting(
            &sample::numbered(sample::optimizer_runs()),
            &sel("training_params.optimizer"),
            &sel("results.accuracy"),
            1e-9,
        );
        serde_json::to_string(&(eq, imp, best)).unwrap()
    };
    let first = once();
    for _ in 0..10 {
        assert_eq!(once(), first);
    }
}

#[test]
fn algorithm_sweep_gap_is_about_two_points() {
    let runs = sample::numbered(sample::algorithm_sweep());
    let stats = group_stats(
        &runs,
        &sel("training_params.algorithm"),
        &sel("results.accuracy"),
    );
    let gap = stats.groups["MLP"].mean - stats.groups["LGBMClassifier"].mean;
    assert!((gap - 0.02).abs() < 0.005, "{gap}");
    let sizes: usize = stats.groups.values().map(|s| s.n).sum();
    assert_eq!(sizes + stats.skipped, runs.len());
}

#[test]
fn filters_and_rankings_compose() {
    let runs = sample::numbered(sample::algorithm_sweep());
    let p1: Predicate = "training_params.algorithm != LinearSVC".parse().unwrap();
    let p2: Predicate = "results.accuracy > 0.85".parse().unwrap();
    let both = filter_records(&runs, &p1.clone().and(p2.clone()));
    let a: Vec<u64> = filter_records(&runs, &p1).iter().map(|r| r.code).collect();
    let b: Vec<u64> = filter_records(&runs, &p2).iter().map(|r| r.code).collect();
    let want: Vec<u64> = a.iter().copied().filter(|c| b.contains(c)).collect();
    assert_eq!(both.iter().map(|r| r.code).collect::<Vec<_>>(), want);

    let m = sel("results.accuracy");
    for k in 0..runs.len() {
        let small: Vec<u64> = top_k(&runs, &m, k).iter().map(|r| r.record.code).collect();
        let big: Vec<u64> = top_k(&runs, &m, k + 1)
            .iter()
            .map(|r| r.record.code)
            .collect();
        assert_eq!(small[..], big[..small.len()]);
    }
    assert_eq!(top_k(&runs, &m, 1)[0].score, 0.913);
}

#[test]
fn monitor_flags_drop() {
    let ok = parse_series("2019-08-01,0.91\n2019-09-01,0.905\n").unwrap();
    assert_eq!(
        monitor_performance(&ok, 0.911, 0.02).unwrap().status,
        HealthStatus::Healthy
    );
    let bad = parse_series("date,accuracy\n2019-08-01,0.91\n2019-09-01,0.88\n").unwrap();
    let r = monitor_performance(&bad, 0.911, 0.02).unwrap();
    assert_eq!(r.status, HealthStatus::Degraded);
    assert_eq!(r.flagged.len(), 1);
    assert_eq!(r.flagged[0].accuracy, 0.88);
}

#[test]
fn short_draft_matches_the_action_not_the_lesson() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = rastro_core::TrailStore::open_or_init(dir.path(), "Cladop").unwrap();
    sample::populate(&mut store).unwrap();
    let draft = "record recall and f1-micro";
    let hits = redundancy_warning(&store, draft, 0.5).unwrap();
    assert!(
        hits.iter()
            .any(|m| m.kind == rastro_core::RecordKind::Action && m.code == 5),
        "{hits:?}"
    );
    let lesson = &sample::lessons()[5];
    let s = similarity(draft, &lesson.description);
    assert!((s - 0.25).abs() < 1e-12, "{s}");
    assert!(!hits
        .iter()
        .any(|m| m.kind == rastro_core::RecordKind::Lesson));
}
