//! Export of a training record as a JSON document keyed by ML Schema concept
//! names (Run, Algorithm, Implementation, HyperParameterSetting, Dataset,
//! EvaluationSpecification, ModelEvaluation, Model, ...).
//!
//! The export is lossless: [`import_mlschema`] rebuilds the record and a
//! second export is byte-identical to the first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{
    Configuration, DataUsed, EvaluationProcedure, HyperValue, MetricResult, Results, TestParams,
    TrainingContext, TrainingParams, TrainingRecord, TrainingStatus,
};
use crate::time::Timestamp;
use crate::validate::validate_training;

/// Where each training-record field lands in the export: record path prefix,
/// then the destination concept path.
pub const FIELD_MAP: &[(&str, &str)] = &[
    ("schema_version", "schema_version"),
    ("code", "Run.code"),
    ("registered_at", "Run.registered_at"),
    ("context.epochs", "Run.epochs"),
    ("context.duration_seconds", "Run.duration_seconds"),
    ("context.status", "Run.status"),
    ("context.error_message", "Run.error_message"),
    ("configuration.program_id", "Implementation.program_id"),
    ("configuration.library_versions", "Implementation.Software"),
    ("configuration.hardware", "Implementation.hardware"),
    ("configuration.random_seed", "Implementation.random_seed"),
    ("data_used.dataset_description", "Dataset.description"),
    ("data_used.selection_criteria", "Dataset.selection_criteria"),
    ("data_used.feature_names", "Dataset.Feature"),
    ("data_used.record_count", "Dataset.DataCharacteristic"),
    ("data_used.class_count", "Dataset.DataCharacteristic"),
    ("training_params.algorithm", "Algorithm.name"),
    ("training_params.hyperparameters", "HyperParameterSetting"),
    (
        "test_params.evaluation_procedure",
        "EvaluationSpecification.EvaluationProcedure",
    ),
    (
        "test_params.metric_names",
        "EvaluationSpecification.EvaluationMeasure",
    ),
    ("results.metrics", "ModelEvaluation"),
    ("results.model_ref", "Model.locator"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlSchemaDocument {
    pub schema_version: u32,
    #[serde(rename = "Run")]
    pub run: RunNode,
    #[serde(rename = "Algorithm")]
    pub algorithm: AlgorithmNode,
    #[serde(rename = "Implementation")]
    pub implementation: ImplementationNode,
    #[serde(rename = "HyperParameterSetting")]
    pub hyperparameter_settings: Vec<HyperParameterSettingNode>,
    #[serde(rename = "Dataset")]
    pub dataset: DatasetNode,
    #[serde(rename = "EvaluationSpecification")]
    pub evaluation_specification: EvaluationSpecificationNode,
    #[serde(rename = "ModelEvaluation")]
    pub model_evaluations: Vec<ModelEvaluationNode>,
    #[serde(rename = "Model", default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunNode {
    pub code: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_at: Option<Timestamp>,
    pub epochs: u64,
    pub duration_seconds: f64,
    pub status: TrainingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmNode {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftwareNode {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplementationNode {
    pub program_id: String,
    #[serde(rename = "Software")]
    pub software: Vec<SoftwareNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParameterSettingNode {
    #[serde(rename = "HyperParameter")]
    pub hyperparameter: String,
    pub value: HyperValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNode {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCharacteristicNode {
    pub name: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetNode {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_criteria: Option<String>,
    #[serde(rename = "Feature")]
    pub features: Vec<FeatureNode>,
    #[serde(
        rename = "DataCharacteristic",
        default,
        skip_serializing_if = "Vec::is_empty"
    )]
    pub characteristics: Vec<DataCharacteristicNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSpecificationNode {
    #[serde(
        rename = "EvaluationProcedure",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub procedure: Option<EvaluationProcedure>,
    #[serde(rename = "EvaluationMeasure")]
    pub measures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluationNode {
    #[serde(rename = "EvaluationMeasure")]
    pub measure: String,
    /// The scalar, or the mean of `samples`.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelNode {
    pub locator: String,
}

const RECORD_COUNT: &str = "record_count";
const CLASS_COUNT: &str = "class_count";

pub fn export_mlschema(record: &TrainingRecord) -> Result<MlSchemaDocument> {
    let violations = validate_training(record);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let ctx = &record.context;
    let cfg = &record.configuration;
    let data = &record.data_used;

    let mut characteristics = Vec::new();
    if let Some(v) = data.record_count {
        characteristics.push(DataCharacteristicNode {
            name: RECORD_COUNT.into(),
            value: v,
        });
    }
    if let Some(v) = data.class_count {
        characteristics.push(DataCharacteristicNode {
            name: CLASS_COUNT.into(),
            value: v,
        });
    }

    Ok(MlSchemaDocument {
        schema_version: record.schema_version,
        run: RunNode {
            code: record.code,
            registered_at: record.registered_at,
            epochs: ctx.epochs,
            duration_seconds: ctx.duration_seconds,
            status: ctx.status,
            error_message: ctx.error_message.clone(),
        },
        algorithm: AlgorithmNode {
            name: record.training_params.algorithm.clone(),
        },
        implementation: ImplementationNode {
            program_id: cfg.program_id.clone(),
            software: cfg
                .library_versions
                .iter()
                .map(|(name, version)| SoftwareNode {
                    name: name.clone(),
                    version: version.clone(),
                })
                .collect(),
            hardware: cfg.hardware.clone(),
            random_seed: cfg.random_seed,
        },
        hyperparameter_settings: record
            .training_params
            .hyperparameters
            .iter()
            .map(|(k, v)| HyperParameterSettingNode {
                hyperparameter: k.clone(),
                value: v.clone(),
            })
            .collect(),
        dataset: DatasetNode {
            description: data.dataset_description.clone(),
            selection_criteria: data.selection_criteria.clone(),
            features: data
                .feature_names
                .iter()
                .map(|n| FeatureNode { name: n.clone() })
                .collect(),
            characteristics,
        },
        evaluation_specification: EvaluationSpecificationNode {
            procedure: record.test_params.evaluation_procedure,
            measures: record.test_params.metric_names.clone(),
        },
        model_evaluations: record
            .results
            .metrics
            .iter()
            .map(|(name, m)| ModelEvaluationNode {
                measure: name.clone(),
                value: m.mean(),
                samples: match m {
                    MetricResult::Scalar(_) => None,
                    MetricResult::Samples(s) => Some(s.clone()),
                },
            })
            .collect(),
        model: record
            .results
            .model_ref
            .clone()
            .map(|locator| ModelNode { locator }),
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_mlschema(doc: &MlSchemaDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn import_mlschema(json: &str) -> Result<TrainingRecord> {
    let doc: MlSchemaDocument = serde_json::from_str(json)
        .map_err(|e| Error::invalid(format!("not an ML Schema export: {e}")))?;
    let mut record_count = None;
    let mut class_count = None;
    for c in &doc.dataset.characteristics {
        match c.name.as_str() {
            RECORD_COUNT => record_count = Some(c.value),
            CLASS_COUNT => class_count = Some(c.value),
            other => {
                return Err(Error::invalid(format!(
                    "unknown DataCharacteristic {other:?}"
                )))
            }
        }
    }
    let record = TrainingRecord {
        schema_version: doc.schema_version,
        code: doc.run.code,
        registered_at: doc.run.registered_at,
        context: TrainingContext {
            epochs: doc.run.epochs,
            duration_seconds: doc.run.duration_seconds,
            status: doc.run.status,
            error_message: doc.run.error_message,
        },
        configuration: Configuration {
            program_id: doc.implementation.program_id,
            library_versions: doc
                .implementation
                .software
                .into_iter()
                .map(|s| (s.name, s.version))
                .collect(),
            hardware: doc.implementation.hardware,
            random_seed: doc.implementation.random_seed,
        },
        data_used: DataUsed {
            dataset_description: doc.dataset.description,
            selection_criteria: doc.dataset.selection_criteria,
            feature_names: doc.dataset.features.into_iter().map(|f| f.name).collect(),
            record_count,
            class_count,
        },
        training_params: TrainingParams {
            algorithm: doc.algorithm.name,
            hyperparameters: doc
                .hyperparameter_settings
                .into_iter()
                .map(|h| (h.hyperparameter, h.value))
                .collect(),
        },
        test_params: TestParams {
            evaluation_procedure: doc.evaluation_specification.procedure,
            metric_names: doc.evaluation_specification.measures,
        },
        results: Results {
            metrics: doc
                .model_evaluations
                .into_iter()
                .map(|e| {
                    let m = match e.samples {
                        Some(s) => MetricResult::Samples(s),
                        None => MetricResult::Scalar(e.value),
                    };
                    (e.measure, m)
                })
                .collect(),
            model_ref: doc.model.map(|m| m.locator),
        },
    };
    let violations = validate_training(&record);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_metrics_export_empty_evaluation_list() {
        let doc = export_mlschema(&TrainingRecord::default()).unwrap();
        assert!(doc.model_evaluations.is_empty());
        assert!(doc.model.is_none());
        let json = render_mlschema(&doc);
        assert!(json.contains("\"ModelEvaluation\": []"));
        let back = import_mlschema(&json).unwrap();
        assert_eq!(back, TrainingRecord::default());
    }

    #[test]
    fn invalid_record_is_refused() {
        let mut r = TrainingRecord::default();
        r.context.status = TrainingStatus::Failed;
        assert!(matches!(export_mlschema(&r), Err(Error::Validation(_))));
        assert!(import_mlschema("{}").is_err());
    }
}
