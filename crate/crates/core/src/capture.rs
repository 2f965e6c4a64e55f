//! Automatic training registration: an in-process run lifecycle and a
//! wrapper that registers an external command as one training.
//!
//! Nothing is written when a run begins. The record is committed once, when
//! the run ends, so a failed run still carries its error message.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::record::{
    Configuration, DataUsed, MetricResult, TestParams, TrainingParams, TrainingRecord,
    TrainingStatus,
};
use crate::store::TrailStore;
use crate::time::Timestamp;
use crate::validate::{validate_training, Violation};

pub const DIR_ENV: &str = "RASTRO_DIR";

/// Bytes of a wrapped command's standard error kept as its error message.
pub const STDERR_TAIL_BYTES: usize = 4096;

/// Resolve the project directory: an explicit path wins, then `RASTRO_DIR`.
pub fn resolve_dir(explicit: Option<PathBuf>) -> Result<PathBuf> {
    explicit
        .or_else(|| {
            std::env::var_os(DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .ok_or_else(|| Error::invalid(format!("no project directory: pass --dir or set {DIR_ENV}")))
}

/// The declared, caller-supplied categories of a run.
#[derive(Debug, Clone, Default)]
pub struct RunSpec {
    pub configuration: Configuration,
    pub data_used: DataUsed,
    pub training_params: TrainingParams,
    pub test_params: TestParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Succeeded,
    Failed(String),
    Interrupted(String),
}

/// A training run under construction.
#[derive(Debug)]
pub struct RunContext {
    started: Instant,
    started_at: Timestamp,
    draft: TrainingRecord,
    samples: BTreeMap<String, Vec<f64>>,
    closed: bool,
}

pub fn begin_run(store: &TrailStore, spec: RunSpec) -> Result<RunContext> {
    if !store.root().is_dir() {
        return Err(Error::io(
            store.root(),
            std::io::Error::new(std::io::ErrorKind::NotFound, "trail directory is gone"),
        ));
    }
    let draft = TrainingRecord {
        configuration: spec.configuration,
        data_used: spec.data_used,
        training_params: spec.training_params,
        test_params: spec.test_params,
        ..TrainingRecord::default()
    };
    Ok(RunContext {
        started: Instant::now(),
        started_at: Timestamp::now(),
        draft,
        samples: BTreeMap::new(),
        closed: false,
    })
}

impl RunContext {
    fn ensure_open(&self) -> Result<()> {
        if self.closed {
            Err(Error::invalid("run already ended"))
        } else {
            Ok(())
        }
    }

    pub fn is_open(&self) -> bool {
        !self.closed
    }

    pub fn draft(&self) -> &TrainingRecord {
        &self.draft
    }

    /// Append one sample to a metric's sample list.
    pub fn log_metric(&mut self, name: &str, value: f64) -> Result<()> {
        self.ensure_open()?;
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "metric {name} value {value} is not finite"
            )));
        }
        self.samples
            .entry(name.to_string())
            .or_default()
            .push(value);
        Ok(())
    }

    pub fn log_epoch(&mut self) -> Result<u64> {
        self.ensure_open()?;
        self.draft.context.epochs += 1;
        Ok(self.draft.context.epochs)
    }

    /// Validate and commit the run; returns its training code.
    ///
    /// `final_metrics` override logged samples of the same name. If the
    /// record fails validation it is still committed, as `interrupted`, with
    /// the violations in `error_message`.
    pub fn end_run(
        &mut self,
        store: &mut TrailStore,
        outcome: RunOutcome,
        final_metrics: BTreeMap<String, MetricResult>,
        model_ref: Option<String>,
    ) -> Result<u64> {
        self.ensure_open()?;
        self.closed = true;
        let elapsed = self.started.elapsed();
        let record = self.finish(elapsed, outcome, final_metrics, model_ref);
        store.append(record)
    }

    fn finish(
        &mut self,
        elapsed: Duration,
        outcome: RunOutcome,
        final_metrics: BTreeMap<String, MetricResult>,
        model_ref: Option<String>,
    ) -> TrainingRecord {
        let mut record = std::mem::take(&mut self.draft);
        record.registered_at = Some(self.started_at);
        record.context.duration_seconds = elapsed.as_secs_f64();
        let (status, message) = match outcome {
            RunOutcome::Succeeded => (TrainingStatus::Succeeded, None),
            RunOutcome::Failed(m) => (TrainingStatus::Failed, Some(m)),
            RunOutcome::Interrupted(m) => (TrainingStatus::Interrupted, Some(m)),
        };
        record.context.status = status;
        record.context.error_message = message;
        for (name, samples) in std::mem::take(&mut self.samples) {
            record
                .results
                .metrics
                .insert(name, MetricResult::Samples(samples));
        }
        record.results.metrics.extend(final_metrics);
        record.results.model_ref = model_ref;

        let violations = validate_training(&record);
        if !violations.is_empty() {
            salvage(&mut record, &violations);
        }
        record
    }
}

/// Turn an invalid record into a committable `interrupted` one that still
/// says what was wrong. Offending metric values are dropped.
fn salvage(record: &mut TrainingRecord, violations: &[Violation]) {
    let mut message = format!("record failed validation: {}", Violation::join(violations));
    if let Some(prev) = record
        .context
        .error_message
        .take()
        .filter(|m| !m.trim().is_empty())
    {
        message = format!("{prev}\n{message}");
    }
    record.context.status = TrainingStatus::Interrupted;
    record.context.error_message = Some(message);
    if !record.context.duration_seconds.is_finite() || record.context.duration_seconds < 0.0 {
        record.context.duration_seconds = 0.0;
    }
    record.results.metrics.retain(|name, _| {
        let path = format!("results.metrics.{name}");
        !violations.iter().any(|v| v.path == path)
    });
    if !validate_training(record).is_empty() {
        // whatever is still invalid lives in the declared parameters; drop them
        record
            .training_params
            .hyperparameters
            .retain(|_, v| match v {
                crate::record::HyperValue::Real(r) => r.is_finite(),
                _ => true,
            });
        record.test_params.evaluation_procedure = None;
    }
}

/// Result of a wrapped command.
#[derive(Debug, Clone, PartialEq)]
pub struct WrapOutcome {
    pub code: u64,
    pub status: TrainingStatus,
    /// The command's exit code, when it ran and exited normally.
    pub exit_code: Option<i32>,
}

/// Run `argv` as a child process and register it as one training.
///
/// Standard output is inherited. Standard error is passed through and its
/// last [`STDERR_TAIL_BYTES`] are kept as the error message of a failed run.
/// A command that cannot be spawned is registered as failed with the spawn
/// error.
pub fn wrap_command(
    store: &mut TrailStore,
    argv: &[String],
    mut spec: RunSpec,
) -> Result<WrapOutcome> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::invalid("empty command line"))?;
    if spec.configuration.program_id.is_empty() {
        spec.configuration.program_id =
            shlex::try_join(argv.iter().map(String::as_str)).unwrap_or_else(|_| argv.join(" "));
    }
    let mut run = begin_run(store, spec)?;

    let child = Command::new(program)
        .args(args)
        .stdin(Stdio::inherit())
        .stdout(Stdio::inherit())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => {
            let code = run.end_run(
                store,
                RunOutcome::Failed(format!("failed to start {program}: {e}")),
                BTreeMap::new(),
                None,
            )?;
            return Ok(WrapOutcome {
                code,
                status: TrainingStatus::Failed,
                exit_code: None,
            });
        }
    };

    let mut tail = TailBuffer::new(STDERR_TAIL_BYTES);
    if let Some(mut err) = child.stderr.take() {
        let mut buf = [0u8; 8192];
        let mut echo = std::io::stderr();
        loop {
            match err.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let _ = echo.write_all(&buf[..n]);
                    tail.push(&buf[..n]);
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
    }
    let status = child.wait().map_err(|e| Error::io(program, e))?;

    let stderr_text = tail.into_string().trim_end().to_string();
    let (outcome, exit_code) = match status.code() {
        Some(0) => (RunOutcome::Succeeded, Some(0)),
        Some(c) => {
            let msg = if stderr_text.trim().is_empty() {
                format!("exited with status {c}")
            } else {
                stderr_text
            };
            (RunOutcome::Failed(msg), Some(c))
        }
        None => {
            let msg = if stderr_text.trim().is_empty() {
                format!("terminated by signal ({status})")
            } else {
                stderr_text
            };
            (RunOutcome::Interrupted(msg), None)
        }
    };
    let kind = match outcome {
        RunOutcome::Succeeded => TrainingStatus::Succeeded,
        RunOutcome::Failed(_) => TrainingStatus::Failed,
        RunOutcome::Interrupted(_) => TrainingStatus::Interrupted,
    };
    let code = run.end_run(store, outcome, BTreeMap::new(), None)?;
    Ok(WrapOutcome {
        code,
        status: kind,
        exit_code,
    })
}

/// Keeps the last `cap` bytes written to it.
struct TailBuffer {
    cap: usize,
    buf: Vec<u8>,
}

impl TailBuffer {
    fn new(cap: usize) -> Self {
        TailBuffer {
            cap,
            buf: Vec::with_capacity(cap),
        }
    }

    fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
        if self.buf.len() > self.cap {
            let excess = self.buf.len() - self.cap;
            self.buf.drain(..excess);
        }
    }

    /// The tail as text, starting at a character boundary.
    fn into_string(self) -> String {
        let mut start = 0;
        while start < self.buf.len() && start < 4 && (self.buf[start] & 0xC0) == 0x80 {
            start += 1;
        }
        String::from_utf8_lossy(&self.buf[start..]).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{EvaluationProcedure, HyperValue, RecordKind};

    fn store() -> (tempfile::TempDir, TrailStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = TrailStore::open_or_init(dir.path(), "capture").unwrap();
        (dir, s)
    }

    fn mlp_spec() -> RunSpec {
        let mut spec = RunSpec::default();
        spec.training_params.algorithm = "MLP".into();
        spec.training_params
            .hyperparameters
            .insert("batch_size".into(), HyperValue::Int(256));
        spec.training_params
            .hyperparameters
            .insert("optimizer".into(), HyperValue::Text("Adam".into()));
        spec
    }

    #[test]
    fn begin_persists_nothing() {
        let (_d, s) = store();
        let a = begin_run(&s, mlp_spec()).unwrap();
        let b = begin_run(&s, RunSpec::default()).unwrap();
        assert!(a.is_open() && b.is_open());
        assert_eq!(a.draft().training_params.algorithm, "MLP");
        assert!(b.draft().training_params.hyperparameters.is_empty());
        assert!(!s.path_of(RecordKind::Training).exists());
    }

    #[test]
    fn epochs_and_samples_accumulate() {
        let (_d, mut s) = store();
        let mut spec = mlp_spec();
        spec.test_params.evaluation_procedure = Some(EvaluationProcedure::CrossValidation {
            partitions: 7,
            repetitions: 2,
        });
        let mut run = begin_run(&s, spec).unwrap();
        for _ in 0..24 {
            run.log_epoch().unwrap();
        }
        for i in 0..14 {
            run.log_metric("accuracy", 0.905 + i as f64 * 0.001)
                .unwrap();
        }
        assert!(run.log_metric("accuracy", f64::NAN).is_err());
        let code = run
            .end_run(&mut s, RunOutcome::Succeeded, BTreeMap::new(), None)
            .unwrap();
        let rec: TrainingRecord = s.read(code).unwrap();
        assert_eq!(rec.context.epochs, 24);
        assert_eq!(rec.results.metrics["accuracy"].values().len(), 14);
        assert_eq!(rec.context.status, TrainingStatus::Succeeded);
    }

    #[test]
    fn closed_context_rejects_everything() {
        let (_d, mut s) = store();
        let mut run = begin_run(&s, RunSpec::default()).unwrap();
        run.end_run(&mut s, RunOutcome::Succeeded, BTreeMap::new(), None)
            .unwrap();
        assert!(run.log_metric("accuracy", 0.5).is_err());
        assert!(run.log_epoch().is_err());
        assert!(run
            .end_run(&mut s, RunOutcome::Succeeded, BTreeMap::new(), None)
            .is_err());
        assert_eq!(s.scan::<TrainingRecord>().unwrap().len(), 1);
    }

    #[test]
    fn duration_comes_from_the_monotonic_clock() {
        let (_d, mut s) = store();
        let mut run = begin_run(&s, RunSpec::default()).unwrap();
        run.started = Instant::now() - Duration::from_secs(475);
        let code = run
            .end_run(&mut s, RunOutcome::Succeeded, BTreeMap::new(), None)
            .unwrap();
        let rec: TrainingRecord = s.read(code).unwrap();
        assert!((rec.context.duration_seconds - 475.0).abs() < 1.0);
    }

    #[test]
    fn failed_run_keeps_its_message() {
        let (_d, mut s) = store();
        let mut run = begin_run(&s, RunSpec::default()).unwrap();
        let code = run
            .end_run(
                &mut s,
                RunOutcome::Failed("ValueError: bad shape".into()),
                BTreeMap::new(),
                None,
            )
            .unwrap();
        let rec: TrainingRecord = s.read(code).unwrap();
        assert_eq!(rec.context.status, TrainingStatus::Failed);
        assert_eq!(
            rec.context.error_message.as_deref(),
            Some("ValueError: bad shape")
        );
    }

    #[test]
    fn invalid_run_is_committed_as_interrupted() {
        let (_d, mut s) = store();
        let mut spec = RunSpec::default();
        spec.test_params.evaluation_procedure = Some(EvaluationProcedure::CrossValidation {
            partitions: 7,
            repetitions: 2,
        });
        let mut run = begin_run(&s, spec).unwrap();
        for _ in 0..13 {
            run.log_metric("accuracy", 0.9).unwrap();
        }
        let code = run
            .end_run(&mut s, RunOutcome::Succeeded, BTreeMap::new(), None)
            .unwrap();
        let rec: TrainingRecord = s.read(code).unwrap();
        assert_eq!(rec.context.status, TrainingStatus::Interrupted);
        assert!(rec
            .context
            .error_message
            .unwrap()
            .contains("expects 14 samples"));
    }

    #[test]
    fn tail_buffer_keeps_the_end() {
        let mut t = TailBuffer::new(4);
        t.push(b"abc");
        t.push(b"defg");
        assert_eq!(t.into_string(), "defg");
        let mut t = TailBuffer::new(3);
        t.push("xé!".as_bytes()); // 'é' is two bytes; the cut lands inside it
        t.push(b"");
        assert_eq!(t.into_string(), "é!");
        let mut t = TailBuffer::new(2);
        t.push("é!".as_bytes());
        assert_eq!(t.into_string(), "!");
    }

    #[cfg(unix)]
    #[test]
    fn wrapped_commands() {
        let (_d, mut s) = store();
        let sh = |script: &str| vec!["sh".to_string(), "-c".to_string(), script.to_string()];

        let ok = wrap_command(&mut s, &sh("exit 0"), RunSpec::default()).unwrap();
        assert_eq!(ok.status, TrainingStatus::Succeeded);
        let rec: TrainingRecord = s.read(ok.code).unwrap();
        assert_eq!(rec.configuration.program_id, "sh -c 'exit 0'");

        let bad = wrap_command(
            &mut s,
            &sh("echo 'out of memory' >&2; exit 1"),
            RunSpec::default(),
        )
        .unwrap();
        assert_eq!(
            (bad.status, bad.exit_code),
            (TrainingStatus::Failed, Some(1))
        );
        let rec: TrainingRecord = s.read(bad.code).unwrap();
        assert!(rec.context.error_message.unwrap().contains("out of memory"));

        let missing = wrap_command(
            &mut s,
            &["/nonexistent/train".to_string()],
            RunSpec::default(),
        )
        .unwrap();
        assert_eq!(missing.status, TrainingStatus::Failed);
        let rec: TrainingRecord = s.read(missing.code).unwrap();
        assert!(rec
            .context
            .error_message
            .unwrap()
            .contains("failed to start"));
        assert_eq!(s.scan::<TrainingRecord>().unwrap().len(), 3);
    }

    #[cfg(unix)]
    #[test]
    fn stderr_is_bounded() {
        let (_d, mut s) = store();
        let argv = vec![
            "sh".to_string(),
            "-c".to_string(),
            "i=0; while [ $i -lt 2000 ]; do echo line$i >&2; i=$((i+1)); done; exit 3".to_string(),
        ];
        let out = wrap_command(&mut s, &argv, RunSpec::default()).unwrap();
        let msg = s
            .read::<TrainingRecord>(out.code)
            .unwrap()
            .context
            .error_message
            .unwrap();
        assert!(msg.len() <= STDERR_TAIL_BYTES);
        assert!(msg.ends_with("line1999"));
    }

    #[test]
    fn env_resolution() {
        assert_eq!(
            resolve_dir(Some(PathBuf::from("/x"))).unwrap(),
            PathBuf::from("/x")
        );
    }
}
