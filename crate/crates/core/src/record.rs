//! The three kinds of trail record: action definitions, training runs and
//! lessons learned.
//!
//! Every record carries `schema_version`, `code` and `registered_at`. The
//! store owns the first two and fills `registered_at` when the caller left it
//! empty; whatever a caller puts in `code` is overwritten on append.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::TaskRef;
use crate::time::Timestamp;
use crate::validate::{self, Violation};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version_default() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Action,
    Training,
    Lesson,
}

impl RecordKind {
    pub const ALL: [RecordKind; 3] = [RecordKind::Action, RecordKind::Training, RecordKind::Lesson];

    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Action => "action",
            RecordKind::Training => "training",
            RecordKind::Lesson => "lesson",
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            RecordKind::Action => "actions.jsonl",
            RecordKind::Training => "trainings.jsonl",
            RecordKind::Lesson => "lessons.jsonl",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "action" | "actions" => Ok(RecordKind::Action),
            "training" | "trainings" => Ok(RecordKind::Training),
            "lesson" | "lessons" => Ok(RecordKind::Lesson),
            other => Err(Error::invalid(format!("unknown record kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionStatus {
    #[default]
    Defined,
    Executed,
    Abandoned,
}

impl FromStr for ActionStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "defined" => Ok(Self::Defined),
            "executed" => Ok(Self::Executed),
            "abandoned" => Ok(Self::Abandoned),
            _ => Err(Error::invalid(format!("unknown action status {s:?}"))),
        }
    }
}

/// A declared project step, planned or executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDefinition {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    #[serde(default)]
    pub code: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_at: Option<Timestamp>,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskRef>,
    /// People, time and other resources spent, as free text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<String>,
    #[serde(default)]
    pub status: ActionStatus,
}

impl ActionDefinition {
    pub fn new(description: impl Into<String>) -> Self {
        ActionDefinition {
            schema_version: SCHEMA_VERSION,
            code: 0,
            registered_at: None,
            description: description.into(),
            task: None,
            resources: None,
            status: ActionStatus::Defined,
        }
    }

    pub fn with_task(mut self, task: TaskRef) -> Self {
        self.task = Some(task);
        self
    }

    pub fn at(mut self, ts: Timestamp) -> Self {
        self.registered_at = Some(ts);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LessonOrigin {
    #[default]
    Human,
    Synthesized,
}

impl FromStr for LessonOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Self::Human),
            "synthesized" => Ok(Self::Synthesized),
            _ => Err(Error::invalid(format!("unknown lesson origin {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesson {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    #[serde(default)]
    pub code: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_at: Option<Timestamp>,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskRef>,
    #[serde(default)]
    pub origin: LessonOrigin,
    #[serde(default)]
    pub related_training_codes: Vec<u64>,
}

impl Lesson {
    pub fn new(description: impl Into<String>) -> Self {
        Lesson {
            schema_version: SCHEMA_VERSION,
            code: 0,
            registered_at: None,
            description: description.into(),
            task: None,
            origin: LessonOrigin::Human,
            related_training_codes: Vec::new(),
        }
    }

    pub fn with_task(mut self, task: TaskRef) -> Self {
        self.task = Some(task);
        self
    }

    pub fn at(mut self, ts: Timestamp) -> Self {
        self.registered_at = Some(ts);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingStatus {
    #[default]
    Succeeded,
    Failed,
    Interrupted,
}

impl TrainingStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Succeeded => "succeeded",
            Self::Failed => "failed",
            Self::Interrupted => "interrupted",
        }
    }
}

/// A typed hyperparameter value. Serialized with a one-key type tag
/// (`{"int":256}`, `{"real":0.001}`, `{"bool":false}`, `{"text":"Adam"}`) so
/// integers and reals never collapse into each other on a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperValue {
    Text(String),
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl HyperValue {
    /// Interpret a command-line literal: bool, then integer, then real, else text.
    pub fn parse_literal(s: &str) -> Self {
        match s {
            "true" => return HyperValue::Bool(true),
            "false" => return HyperValue::Bool(false),
            _ => {}
        }
        if let Ok(i) = s.parse::<i64>() {
            return HyperValue::Int(i);
        }
        match s.parse::<f64>() {
            Ok(r) if r.is_finite() => HyperValue::Real(r),
            _ => HyperValue::Text(s.to_string()),
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Text(s) => f.write_str(s),
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Real(r) => write!(f, "{r}"),
            HyperValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// A metric as a single value or as per-fold samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricResult {
    Scalar(f64),
    Samples(Vec<f64>),
}

impl MetricResult {
    pub fn values(&self) -> &[f64] {
        match self {
            MetricResult::Scalar(v) => std::slice::from_ref(v),
            MetricResult::Samples(s) => s,
        }
    }

    /// The scalar itself, or the mean of the samples (`NaN` for an empty list).
    pub fn mean(&self) -> f64 {
        let v = self.values();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluationProcedure {
    Holdout { fraction: f64, stratified: bool },
    CrossValidation { partitions: u32, repetitions: u32 },
}

impl fmt::Display for EvaluationProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluationProcedure::Holdout {
                fraction,
                stratified,
            } => {
                write!(
                    f,
                    "holdout {fraction}{}",
                    if *stratified { " stratified" } else { "" }
                )
            }
            EvaluationProcedure::CrossValidation {
                partitions,
                repetitions,
            } => {
                write!(f, "cross-validation {partitions}x{repetitions}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingContext {
    #[serde(default)]
    pub epochs: u64,
    #[serde(default)]
    pub duration_seconds: f64,
    #[serde(default)]
    pub status: TrainingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    #[serde(default)]
    pub program_id: String,
    #[serde(default)]
    pub library_versions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataUsed {
    #[serde(default)]
    pub dataset_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_criteria: Option<String>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingParams {
    #[serde(default)]
    pub algorithm: String,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, HyperValue>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_procedure: Option<EvaluationProcedure>,
    #[serde(default)]
    pub metric_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Results {
    #[serde(default)]
    pub metrics: BTreeMap<String, MetricResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ref: Option<String>,
}

/// One model-building run, its attributes grouped in six categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    #[serde(default)]
    pub code: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_at: Option<Timestamp>,
    #[serde(default)]
    pub context: TrainingContext,
    #[serde(default)]
    pub configuration: Configuration,
    #[serde(default)]
    pub data_used: DataUsed,
    #[serde(default)]
    pub training_params: TrainingParams,
    #[serde(default)]
    pub test_params: TestParams,
    #[serde(default)]
    pub results: Results,
}

impl Default for TrainingRecord {
    fn default() -> Self {
        TrainingRecord {
            schema_version: SCHEMA_VERSION,
            code: 0,
            registered_at: None,
            context: TrainingContext::default(),
            configuration: Configuration::default(),
            data_used: DataUsed::default(),
            training_params: TrainingParams::default(),
            test_params: TestParams::default(),
            results: Results::default(),
        }
    }
}

/// Behaviour shared by the three persisted record kinds.
pub trait TrailRecord: Serialize + DeserializeOwned + Clone {
    const KIND: RecordKind;

    fn code(&self) -> u64;
    fn set_code(&mut self, code: u64);
    fn registered_at(&self) -> Option<Timestamp>;
    fn set_registered_at(&mut self, ts: Timestamp);
    fn schema_version(&self) -> u32;
    fn set_schema_version(&mut self, v: u32);
    /// Record-local invariant violations; cross-record checks live in the store.
    fn violations(&self) -> Vec<Violation>;
}

macro_rules! trail_record {
    ($ty:ty, $kind:expr, $validate:path) => {
        impl TrailRecord for $ty {
            const KIND: RecordKind = $kind;

            fn code(&self) -> u64 {
                self.code
            }
            fn set_code(&mut self, code: u64) {
                self.code = code;
            }
            fn registered_at(&self) -> Option<Timestamp> {
                self.registered_at
            }
            fn set_registered_at(&mut self, ts: Timestamp) {
                self.registered_at = Some(ts);
            }
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
            fn set_schema_version(&mut self, v: u32) {
                self.schema_version = v;
            }
            fn violations(&self) -> Vec<Violation> {
                $validate(self)
            }
        }
    };
}

trail_record!(
    ActionDefinition,
    RecordKind::Action,
    validate::validate_action
);
trail_record!(
    TrainingRecord,
    RecordKind::Training,
    validate::validate_training
);
trail_record!(Lesson, RecordKind::Lesson, validate::validate_lesson);

/// A record of any kind, for views that interleave the three streams.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AnyRecord {
    Action(ActionDefinition),
    Training(TrainingRecord),
    Lesson(Lesson),
}

impl AnyRecord {
    pub fn kind(&self) -> RecordKind {
        match self {
            AnyRecord::Action(_) => RecordKind::Action,
            AnyRecord::Training(_) => RecordKind::Training,
            AnyRecord::Lesson(_) => RecordKind::Lesson,
        }
    }

    pub fn code(&self) -> u64 {
        match self {
            AnyRecord::Action(r) => r.code,
            AnyRecord::Training(r) => r.code,
            AnyRecord::Lesson(r) => r.code,
        }
    }

    pub fn registered_at(&self) -> Option<Timestamp> {
        match self {
            AnyRecord::Action(r) => r.registered_at,
            AnyRecord::Training(r) => r.registered_at,
            AnyRecord::Lesson(r) => r.registered_at,
        }
    }

    /// The record serialized exactly as a store line (without the newline).
    pub fn to_json_line(&self) -> String {
        let s = match self {
            AnyRecord::Action(r) => serde_json::to_string(r),
            AnyRecord::Training(r) => serde_json::to_string(r),
            AnyRecord::Lesson(r) => serde_json::to_string(r),
        };
        s.expect("records always serialize")
    }

    /// The record as a JSON object with the same field names as on disk.
    pub fn to_value(&self) -> serde_json::Value {
        let v = match self {
            AnyRecord::Action(r) => serde_json::to_value(r),
            AnyRecord::Training(r) => serde_json::to_value(r),
            AnyRecord::Lesson(r) => serde_json::to_value(r),
        };
        v.expect("records always serialize")
    }
}

impl From<ActionDefinition> for AnyRecord {
    fn from(r: ActionDefinition) -> Self {
        AnyRecord::Action(r)
    }
}

impl From<TrainingRecord> for AnyRecord {
    fn from(r: TrainingRecord) -> Self {
        AnyRecord::Training(r)
    }
}

impl From<Lesson> for AnyRecord {
    fn from(r: Lesson) -> Self {
        AnyRecord::Lesson(r)
    }
}
