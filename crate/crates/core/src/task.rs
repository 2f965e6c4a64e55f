//! CRISP-DM phase/task taxonomy used to tag actions and lessons.
//!
//! Task names are normalized (trimmed, lowercased, internal whitespace
//! collapsed) and looked up in a built-in table of the generic CRISP-DM tasks
//! plus a few project-specific names. Anything not in the table is kept
//! verbatim under [`Phase::Other`]; tagging is never refused for an unknown name.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    BusinessUnderstanding,
    DataUnderstanding,
    DataPreparation,
    Modeling,
    Evaluation,
    Deployment,
    Other,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::BusinessUnderstanding,
        Phase::DataUnderstanding,
        Phase::DataPreparation,
        Phase::Modeling,
        Phase::Evaluation,
        Phase::Deployment,
        Phase::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::BusinessUnderstanding => "business-understanding",
            Phase::DataUnderstanding => "data-understanding",
            Phase::DataPreparation => "data-preparation",
            Phase::Modeling => "modeling",
            Phase::Evaluation => "evaluation",
            Phase::Deployment => "deployment",
            Phase::Other => "other",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = normalize(s).replace(' ', "-");
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown phase {s:?}")))
    }
}

/// A task tag: the phase it belongs to and the normalized task name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskRef {
    pub phase: Phase,
    pub task: String,
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.phase, self.task)
    }
}

/// One extra taxonomy entry declared in `project.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task: String,
    pub phase: Phase,
}

const BUILTIN: &[(&str, Phase)] = &[
    // phase names, usable as coarse tags
    ("business understanding", Phase::BusinessUnderstanding),
    ("data understanding", Phase::DataUnderstanding),
    ("data preparation", Phase::DataPreparation),
    ("modeling", Phase::Modeling),
    ("evaluation", Phase::Evaluation),
    ("deployment", Phase::Deployment),
    // generic tasks
    (
        "determine business objectives",
        Phase::BusinessUnderstanding,
    ),
    ("assess situation", Phase::BusinessUnderstanding),
    ("determine data mining goals", Phase::BusinessUnderstanding),
    ("produce project plan", Phase::BusinessUnderstanding),
    ("collect initial data", Phase::DataUnderstanding),
    ("describe data", Phase::DataUnderstanding),
    ("explore data", Phase::DataUnderstanding),
    ("verify data quality", Phase::DataUnderstanding),
    ("select data", Phase::DataPreparation),
    ("clean data", Phase::DataPreparation),
    ("construct data", Phase::DataPreparation),
    ("integrate data", Phase::DataPreparation),
    ("format data", Phase::DataPreparation),
    ("select modeling technique", Phase::Modeling),
    ("generate test design", Phase::Modeling),
    ("build model", Phase::Modeling),
    ("assess model", Phase::Modeling),
    ("evaluate results", Phase::Evaluation),
    ("review process", Phase::Evaluation),
    ("determine next steps", Phase::Evaluation),
    ("plan deployment", Phase::Deployment),
    ("plan monitoring and maintenance", Phase::Deployment),
    ("produce final report", Phase::Deployment),
    ("review project", Phase::Deployment),
    // names used in practice for the tasks above
    ("project of tests", Phase::Modeling),
    ("construct model", Phase::Modeling),
    ("select technique", Phase::Modeling),
];

/// Trim, case-fold and collapse runs of whitespace.
pub fn normalize(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The built-in table extended with project-declared entries. Project entries
/// take precedence over built-in ones with the same name.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    extra: Vec<(String, Phase)>,
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entries<'a>(entries: impl IntoIterator<Item = &'a TaskEntry>) -> Self {
        let mut tax = Self::new();
        for e in entries {
            tax.insert(&e.task, e.phase);
        }
        tax
    }

    pub fn insert(&mut self, task: &str, phase: Phase) {
        let name = normalize(task);
        self.extra.retain(|(n, _)| *n != name);
        self.extra.push((name, phase));
    }

    pub fn canonical(&self, raw: &str) -> Result<TaskRef> {
        let task = normalize(raw);
        if task.is_empty() {
            return Err(Error::invalid("task name is empty"));
        }
        let phase = self
            .extra
            .iter()
            .map(|(n, p)| (n.as_str(), *p))
            .chain(BUILTIN.iter().copied())
            .find(|(n, _)| *n == task)
            .map_or(Phase::Other, |(_, p)| p);
        Ok(TaskRef { phase, task })
    }
}

/// Canonicalize a free-text task name against the built-in taxonomy.
pub fn canonical_task(raw: &str) -> Result<TaskRef> {
    Taxonomy::new().canonical(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_task() {
        let t = canonical_task("Format Data").unwrap();
        assert_eq!(t.phase, Phase::DataPreparation);
        assert_eq!(t.task, "format data");
        assert_eq!(canonical_task("format   data").unwrap(), t);
        assert_eq!(
            canonical_task("Project of tests").unwrap().phase,
            Phase::Modeling
        );
    }

    #[test]
    fn unmatched_falls_back_to_other() {
        let t = canonical_task("Frobnicate").unwrap();
        assert_eq!((t.phase, t.task.as_str()), (Phase::Other, "frobnicate"));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(canonical_task("").is_err());
        assert!(canonical_task(" \t\n").is_err());
    }

    #[test]
    fn project_entries_extend_and_override() {
        let mut tax = Taxonomy::new();
        tax.insert("Label Review", Phase::DataUnderstanding);
        tax.insert("format data", Phase::Modeling);
        assert_eq!(
            tax.canonical("label  REVIEW").unwrap().phase,
            Phase::DataUnderstanding
        );
        assert_eq!(tax.canonical("Format Data").unwrap().phase, Phase::Modeling);
    }

    #[test]
    fn phase_parse() {
        assert_eq!(
            "Data Preparation".parse::<Phase>().unwrap(),
            Phase::DataPreparation
        );
        assert_eq!("modeling".parse::<Phase>().unwrap(), Phase::Modeling);
        assert!("nope".parse::<Phase>().is_err());
    }

    proptest! {
        #[test]
        fn canonical_is_idempotent(raw in "[ a-zA-Zçã\t]{0,40}") {
            match canonical_task(&raw) {
                Ok(t) => {
                    let again = canonical_task(&t.task).unwrap();
                    prop_assert_eq!(again, t);
                }
                Err(_) => prop_assert!(raw.trim().is_empty()),
            }
        }
    }
}
