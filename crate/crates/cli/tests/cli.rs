use std::io::Write;
use std::process::{Command, Output, Stdio};

use rastro_core::record::TrainingRecord;
use rastro_core::{sample, TrailStore};

fn rastro(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rastro"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .env_remove("RASTRO_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn init() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    assert!(rastro(dir.path(), &["init", "--name", "Cladop"])
        .status
        .success());
    dir
}

#[test]
fn action_add_prints_code_and_tags_task() {
    let dir = init();
    let out = rastro(
        dir.path(),
        &[
            "action",
            "add",
            "-m",
            "Initiating the inclusion of names of files in the model",
            "--task",
            "Select Data",
            "--at",
            "2019-03-26T11:57:00Z",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out), "1\n");
    let q = rastro(
        dir.path(),
        &["query", "actions", "task.task", "=", "select data"],
    );
    assert_eq!(
        stdout(&q),
        "- 2019-03-26T11:57:00Z action 1 [data-preparation/select data]: Initiating the inclusion of names of files in the model\n"
    );
}

#[test]
fn blank_lesson_is_a_user_error() {
    let dir = init();
    let out = rastro(dir.path(), &["lesson", "add", "-m", "   "]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert!(stdout(&rastro(dir.path(), &["query", "lessons"])).is_empty());
}

#[test]
fn missing_trail_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rastro(dir.path(), &["query", "actions"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dir_comes_from_environment() {
    let dir = init();
    let out = Command::new(env!("CARGO_BIN_EXE_rastro"))
        .args(["lesson", "add", "-m", "env dir works"])
        .env("RASTRO_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&rastro(dir.path(), &["query", "lessons"])).contains("env dir works"));
}

#[test]
fn training_add_and_stats_per_algorithm() {
    let dir = init();
    for r in sample::algorithm_sweep() {
        let mut child = Command::new(env!("CARGO_BIN_EXE_rastro"))
            .arg("--dir")
            .arg(dir.path())
            .args(["training", "add", "--file", "-"])
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        child
            .stdin
            .take()
            .unwrap()
            .write_all(serde_json::to_string(&r).unwrap().as_bytes())
            .unwrap();
        assert!(child.wait().unwrap().success());
    }
    let out = rastro(
        dir.path(),
        &[
            "stats",
            "--group-by",
            "training_params.algorithm",
            "--metric",
            "results.accuracy",
            "--json",
        ],
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let groups = v["groups"].as_object().unwrap();
    assert_eq!(groups.len(), 4);
    assert_eq!(groups["MLP"]["n"], 6);

    let text = stdout(&rastro(
        dir.path(),
        &["stats", "--group-by", "training_params.algorithm"],
    ));
    assert_eq!(text.lines().count(), 5, "{text}");

    let top = stdout(&rastro(
        dir.path(),
        &["top", "--metric", "results.accuracy", "-k", "1"],
    ));
    assert_eq!(top, "4 MLP 0.9130\n");
}

#[test]
fn query_json_is_the_stored_line() {
    let dir = init();
    let mut store = TrailStore::open(dir.path()).unwrap();
    sample::populate(&mut store).unwrap();
    let out = rastro(
        dir.path(),
        &[
            "query",
            "trainings",
            "results.accuracy",
            ">",
            "0.915",
            "--json",
        ],
    );
    let lines = stdout(&out);
    let stored = std::fs::read_to_string(dir.path().join("trainings.jsonl")).unwrap();
    assert_eq!(lines, stored.lines().nth(1).unwrap().to_string() + "\n");
    let back: TrainingRecord = serde_json::from_str(lines.trim()).unwrap();
    assert_eq!(back.code, 2);
}

#[test]
fn strict_action_refuses_near_duplicate() {
    let dir = init();
    let mut store = TrailStore::open(dir.path()).unwrap();
    sample::populate(&mut store).unwrap();
    let out = rastro(
        dir.path(),
        &[
            "action",
            "add",
            "-m",
            "Program modified (shallow) to also record recall and f1-micro",
            "--strict",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("action 5"));
    let loose = rastro(
        dir.path(),
        &[
            "action",
            "add",
            "-m",
            "Program modified (shallow) to also record recall and f1-micro",
        ],
    );
    assert!(loose.status.success());
    assert_eq!(stdout(&loose), "7\n");
}

#[test]
fn monitor_reads_series_file() {
    let dir = init();
    let series = dir.path().join("series.csv");
    std::fs::write(
        &series,
        "timestamp,accuracy\n2019-08-01,0.91\n2019-09-01,0.88\n",
    )
    .unwrap();
    let out = rastro(
        dir.path(),
        &[
            "monitor",
            "--baseline",
            "0.911",
            "--threshold",
            "0.02",
            "--series",
            series.to_str().unwrap(),
            "--json",
        ],
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "degraded");
    assert_eq!(v["flagged"].as_array().unwrap().len(), 1);
}
