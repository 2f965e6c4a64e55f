//! Reports over the sample trail compared byte-for-byte with frozen files.
//! Set `RASTRO_UPDATE_GOLDEN=1` to rewrite them after an intentional change.

use std::fs;
use std::path::PathBuf;

use rastro_core::report::{chronology, task_report};
use rastro_core::{sample, TrailStore};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("RASTRO_UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden file");
}

fn sample_store() -> (tempfile::TempDir, TrailStore) {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TrailStore::open_or_init(dir.path(), "Cladop").unwrap();
    sample::populate(&mut store).unwrap();
    (dir, store)
}

#[test]
fn select_data_report() {
    let (_d, store) = sample_store();
    let task = store.taxonomy().canonical("Select Data").unwrap();
    check(
        "report-select-data.md",
        &task_report(&store, &task).unwrap(),
    );
}

#[test]
fn project_of_tests_report() {
    let (_d, store) = sample_store();
    let task = store.taxonomy().canonical("Project of tests").unwrap();
    check(
        "report-project-of-tests.md",
        &task_report(&store, &task).unwrap(),
    );
}

#[test]
fn chronology_report() {
    let (_d, store) = sample_store();
    check("chronology.md", &chronology(&store).unwrap());
}
