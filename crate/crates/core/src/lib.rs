//! Experiment trail for data-mining projects.
//!
//! A trail is an append-only record of three things: the actions a team
//! defines, the trainings it runs, and the lessons it learns. This crate
//! stores the trail as JSON lines in a project directory ([`store`]), captures
//! trainings automatically ([`capture`]), queries and aggregates them
//! ([`query`], [`metrics`], [`stats`]), proposes lessons mined from the runs
//! ([`synthesis`]) and renders reports ([`report`]).

pub mod capture;
pub mod error;
pub mod metrics;
pub mod query;
pub mod record;
pub mod report;
pub mod sample;
pub mod stats;
pub mod store;
pub mod synthesis;
pub mod task;
pub mod time;
pub mod validate;

pub use error::{Error, Result};
pub use record::{
    ActionDefinition, ActionStatus, AnyRecord, EvaluationProcedure, HyperValue, Lesson,
    LessonOrigin, MetricResult, RecordKind, TrailRecord, TrainingRecord, TrainingStatus,
};
pub use stats::{summarize, SummaryStats};
pub use store::TrailStore;
pub use task::{canonical_task, Phase, TaskRef, Taxonomy};
pub use time::Timestamp;
