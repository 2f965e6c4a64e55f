//! Append-only, code-keyed persistence for one project directory.
//!
//! Layout:
//!
//! ```text
//! <root>/project.json      project metadata and settings
//! <root>/actions.jsonl     one ActionDefinition per line
//! <root>/trainings.jsonl   one TrainingRecord per line
//! <root>/lessons.jsonl     one Lesson per line
//! <root>/.lock             advisory writer lock
//! ```
//!
//! Writers serialize through an exclusive lock on `.lock`; readers take no
//! lock. A line becomes visible once its terminating newline is on disk, so a
//! reader that races an append simply skips the unterminated tail. The next
//! writer truncates such a tail (left behind by a crashed writer) before
//! appending.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{
    ActionDefinition, AnyRecord, Lesson, RecordKind, TrailRecord, TrainingRecord, SCHEMA_VERSION,
};
use crate::task::{TaskEntry, Taxonomy};
use crate::time::Timestamp;
use crate::validate::Violation;

pub const PROJECT_FILE: &str = "project.json";
pub const LOCK_FILE: &str = ".lock";

/// Tunables stored in `project.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Absolute tolerance under which two metric values count as equal.
    pub equality_tolerance: f64,
    /// Improvement candidates below this many percentage points are dropped.
    pub min_improvement_points: f64,
    /// Jaccard threshold for redundancy warnings.
    pub similarity_threshold: f64,
    pub lock_timeout_ms: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            equality_tolerance: 1e-9,
            min_improvement_points: 0.5,
            similarity_threshold: 0.5,
            lock_timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub schema_version: u32,
    pub name: String,
    pub created_at: Timestamp,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub taxonomy: Vec<TaskEntry>,
}

/// Committed prefix of one record stream: bytes scanned and the highest code seen.
#[derive(Debug, Clone, Copy, Default)]
struct StreamState {
    offset: u64,
    lines: usize,
    last_code: u64,
}

#[derive(Debug)]
pub struct TrailStore {
    root: PathBuf,
    meta: ProjectMeta,
    streams: [StreamState; 3],
}

fn slot(kind: RecordKind) -> usize {
    match kind {
        RecordKind::Action => 0,
        RecordKind::Training => 1,
        RecordKind::Lesson => 2,
    }
}

#[derive(Deserialize)]
struct LineHeader {
    schema_version: u32,
    code: u64,
}

impl TrailStore {
    /// Open an existing trail directory, or create one. Idempotent: an existing
    /// `project.json` is kept as is and `project_name` is ignored.
    pub fn open_or_init(path: impl AsRef<Path>, project_name: &str) -> Result<Self> {
        let root = path.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let meta_path = root.join(PROJECT_FILE);
        if !meta_path.exists() {
            let _lock = acquire_lock(
                &root,
                Duration::from_millis(Settings::default().lock_timeout_ms),
            )?;
            if !meta_path.exists() {
                let meta = ProjectMeta {
                    schema_version: SCHEMA_VERSION,
                    name: project_name.to_string(),
                    created_at: Timestamp::now(),
                    settings: Settings::default(),
                    taxonomy: Vec::new(),
                };
                write_atomic(&meta_path, &to_pretty(&meta))?;
            }
        }
        Self::open(root)
    }

    /// Open an existing trail directory.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let root = path.as_ref().to_path_buf();
        let meta_path = root.join(PROJECT_FILE);
        if !meta_path.exists() {
            return Err(Error::invalid(format!(
                "{} is not a trail directory (no {PROJECT_FILE})",
                root.display()
            )));
        }
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let version: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Corrupt {
                path: meta_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
        let found = version
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found > SCHEMA_VERSION {
            return Err(Error::UnsupportedSchema {
                path: meta_path,
                found,
                supported: SCHEMA_VERSION,
            });
        }
        let meta: ProjectMeta = serde_json::from_value(version).map_err(|e| Error::Corrupt {
            path: meta_path.clone(),
            line: 1,
            message: e.to_string(),
        })?;

        let mut store = TrailStore {
            root,
            meta,
            streams: [StreamState::default(); 3],
        };
        for kind in RecordKind::ALL {
            store.refresh(kind, false)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn meta(&self) -> &ProjectMeta {
        &self.meta
    }

    pub fn settings(&self) -> &Settings {
        &self.meta.settings
    }

    pub fn taxonomy(&self) -> Taxonomy {
        Taxonomy::with_entries(&self.meta.taxonomy)
    }

    pub fn path_of(&self, kind: RecordKind) -> PathBuf {
        self.root.join(kind.file_name())
    }

    /// Highest code assigned so far for `kind` (0 when none), as of the last
    /// open or append through this handle.
    pub fn last_code(&self, kind: RecordKind) -> u64 {
        self.streams[slot(kind)].last_code
    }

    pub fn next_code(&self, kind: RecordKind) -> u64 {
        self.last_code(kind) + 1
    }

    /// Validate, assign a code, and durably append one record. Returns the code.
    ///
    /// The caller's `code` and `schema_version` are overwritten; a missing
    /// `registered_at` becomes the current time.
    pub fn append<R: TrailRecord>(&mut self, mut record: R) -> Result<u64> {
        let mut violations = record.violations();
        let referenced = referenced_trainings(&record);
        if !referenced.is_empty() {
            let known: Vec<u64> = self
                .scan::<TrainingRecord>()?
                .iter()
                .map(|t| t.code)
                .collect();
            for code in referenced {
                if code != 0 && known.binary_search(&code).is_err() {
                    violations.push(Violation {
                        path: "related_training_codes".into(),
                        message: format!("training {code} does not exist"),
                    });
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        let timeout = Duration::from_millis(self.meta.settings.lock_timeout_ms);
        let _lock = acquire_lock(&self.root, timeout)?;
        self.refresh(R::KIND, true)?;

        let code = self.last_code(R::KIND) + 1;
        record.set_code(code);
        record.set_schema_version(SCHEMA_VERSION);
        if record.registered_at().is_none() {
            record.set_registered_at(Timestamp::now());
        }
        let mut line = serde_json::to_string(&record).expect("records always serialize");
        line.push('\n');

        let path = self.path_of(R::KIND);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let before = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if let Err(e) = file
            .write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
        {
            // drop whatever part of the line made it out
            let _ = file.set_len(before);
            return Err(Error::io(&path, e));
        }

        let state = &mut self.streams[slot(R::KIND)];
        state.offset = before + line.len() as u64;
        state.lines += 1;
        state.last_code = code;
        Ok(code)
    }

    /// All committed records of one kind, in code order.
    pub fn scan<R: TrailRecord>(&self) -> Result<Vec<R>> {
        self.scan_lines(R::KIND)?
            .into_iter()
            .map(|(lineno, line)| parse_line::<R>(&self.path_of(R::KIND), lineno, &line))
            .collect()
    }

    pub fn read<R: TrailRecord>(&self, code: u64) -> Result<R> {
        let (lineno, line) = self.find_line(R::KIND, code)?;
        parse_line::<R>(&self.path_of(R::KIND), lineno, &line)
    }

    /// The committed line for `code`, exactly as stored (without the newline).
    pub fn read_raw(&self, kind: RecordKind, code: u64) -> Result<String> {
        self.find_line(kind, code).map(|(_, line)| line)
    }

    /// Binary search on the line headers; codes within a stream only grow.
    fn find_line(&self, kind: RecordKind, code: u64) -> Result<(usize, String)> {
        let path = self.path_of(kind);
        let mut lines = self.scan_lines(kind)?;
        let (mut lo, mut hi) = (0, lines.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let (lineno, line) = &lines[mid];
            let found = parse_header(&path, *lineno, line)?.code;
            match found.cmp(&code) {
                std::cmp::Ordering::Equal => return Ok(lines.swap_remove(mid)),
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
            }
        }
        Err(Error::NotFound {
            kind: kind.as_str(),
            code,
        })
    }

    pub fn scan_any(&self, kind: RecordKind) -> Result<Vec<AnyRecord>> {
        Ok(match kind {
            RecordKind::Action => self
                .scan::<ActionDefinition>()?
                .into_iter()
                .map(Into::into)
                .collect(),
            RecordKind::Training => self
                .scan::<TrainingRecord>()?
                .into_iter()
                .map(Into::into)
                .collect(),
            RecordKind::Lesson => self.scan::<Lesson>()?.into_iter().map(Into::into).collect(),
        })
    }

    pub fn read_any(&self, kind: RecordKind, code: u64) -> Result<AnyRecord> {
        Ok(match kind {
            RecordKind::Action => self.read::<ActionDefinition>(code)?.into(),
            RecordKind::Training => self.read::<TrainingRecord>(code)?.into(),
            RecordKind::Lesson => self.read::<Lesson>(code)?.into(),
        })
    }

    /// Complete lines of a stream with their 1-based line numbers. A trailing
    /// unterminated line is skipped.
    fn scan_lines(&self, kind: RecordKind) -> Result<Vec<(usize, String)>> {
        let path = self.path_of(kind);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let (lines, partial) = split_lines(&path, &bytes, 1)?;
        if partial > 0 {
            log::warn!(
                "{}: skipping {partial} bytes of an uncommitted trailing line",
                path.display()
            );
        }
        Ok(lines)
    }

    /// Catch up with lines appended since the last refresh. With `repair`
    /// set (only while holding the lock) an unterminated tail is truncated.
    fn refresh(&mut self, kind: RecordKind, repair: bool) -> Result<()> {
        let path = self.path_of(kind);
        let mut file = match OpenOptions::new().read(true).write(repair).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                self.streams[slot(kind)] = StreamState::default();
                return Ok(());
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut state = self.streams[slot(kind)];
        if len < state.offset {
            state = StreamState::default();
        }
        if len == state.offset {
            return Ok(());
        }

        file.seek(SeekFrom::Start(state.offset))
            .map_err(|e| Error::io(&path, e))?;
        let mut tail = Vec::with_capacity((len - state.offset) as usize);
        file.read_to_end(&mut tail)
            .map_err(|e| Error::io(&path, e))?;

        let full_scan = state.offset == 0;
        let (lines, partial) = split_lines(&path, &tail, state.lines + 1)?;
        for (lineno, line) in &lines {
            let header = parse_header(&path, *lineno, line)?;
            if header.code <= state.last_code {
                return Err(Error::Corrupt {
                    path: path.clone(),
                    line: *lineno,
                    message: format!("code {} does not follow {}", header.code, state.last_code),
                });
            }
            state.last_code = header.code;
            if full_scan {
                check_body(kind, &path, *lineno, line)?;
            }
        }
        let complete = tail.len() - partial;
        state.lines += tail[..complete].iter().filter(|b| **b == b'\n').count();
        state.offset += complete as u64;
        if partial > 0 {
            if repair {
                log::warn!(
                    "{}: truncating {partial} bytes of an interrupted append",
                    path.display()
                );
                file.set_len(state.offset)
                    .map_err(|e| Error::io(&path, e))?;
            } else {
                log::warn!(
                    "{}: skipping {partial} bytes of an uncommitted trailing line",
                    path.display()
                );
            }
        }
        self.streams[slot(kind)] = state;
        Ok(())
    }
}

fn referenced_trainings<R: TrailRecord>(record: &R) -> Vec<u64> {
    if R::KIND != RecordKind::Lesson {
        return Vec::new();
    }
    serde_json::to_value(record)
        .ok()
        .and_then(|v| v.get("related_training_codes").cloned())
        .and_then(|v| serde_json::from_value(v).ok())
        .unwrap_or_default()
}

/// Split into complete lines; returns them plus the length of any
/// unterminated tail. Blank lines are ignored.
fn split_lines(
    path: &Path,
    bytes: &[u8],
    first_line: usize,
) -> Result<(Vec<(usize, String)>, usize)> {
    let mut lines = Vec::new();
    let mut rest = bytes;
    let mut lineno = first_line;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = rest
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 || buf.last() != Some(&b'\n') {
            return Ok((lines, n));
        }
        buf.pop();
        let text = std::str::from_utf8(&buf).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("invalid UTF-8: {e}"),
        })?;
        if !text.trim().is_empty() {
            lines.push((lineno, text.to_string()));
        }
        lineno += 1;
    }
}

fn parse_header(path: &Path, line: usize, text: &str) -> Result<LineHeader> {
    let header: LineHeader = serde_json::from_str(text).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })?;
    if header.schema_version > SCHEMA_VERSION {
        return Err(Error::UnsupportedSchema {
            path: path.to_path_buf(),
            found: header.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(header)
}

fn parse_line<R: TrailRecord>(path: &Path, line: usize, text: &str) -> Result<R> {
    parse_header(path, line, text)?;
    serde_json::from_str(text).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

fn check_body(kind: RecordKind, path: &Path, line: usize, text: &str) -> Result<()> {
    match kind {
        RecordKind::Action => parse_line::<ActionDefinition>(path, line, text).map(drop),
        RecordKind::Training => parse_line::<TrainingRecord>(path, line, text).map(drop),
        RecordKind::Lesson => parse_line::<Lesson>(path, line, text).map(drop),
    }
}

/// Exclusive advisory lock on `<root>/.lock`, released on drop.
struct DirLock(File);

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}

fn acquire_lock(root: &Path, timeout: Duration) -> Result<DirLock> {
    let path = root.join(LOCK_FILE);
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let deadline = Instant::now() + timeout;
    let mut backoff = Duration::from_micros(200);
    loop {
        match file.try_lock() {
            Ok(()) => return Ok(DirLock(file)),
            Err(fs::TryLockError::WouldBlock) => {
                if Instant::now() >= deadline {
                    return Err(Error::LockTimeout(path));
                }
                thread::sleep(backoff);
                backoff = (backoff * 2).min(Duration::from_millis(20));
            }
            Err(fs::TryLockError::Error(e)) => return Err(Error::io(&path, e)),
        }
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metadata always serializes");
    s.push('\n');
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents.as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
