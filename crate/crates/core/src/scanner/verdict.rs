use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ScanError;
use crate::features::{extract_detailed, FeatureSchema, SensitiveDictionary};
use crate::ingest::{open_archive_with, split_archive_filename, DistFormat, IngestLimits};
use crate::models::{Label, TreeEnsembleModel};
use crate::Ecosystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Classified,
    IngestError,
    FetchError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model_id: String,
    pub probability: f64,
    pub label: Label,
}

/// One line of the scan sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanVerdict {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub disposition: Disposition,
    /// `<kind>: <message>` for error dispositions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Per-model results; empty unless classified.
    pub models: Vec<ModelScore>,
    /// Malicious under at least one model.
    pub flagged: bool,
    /// From the most confident flagging model; empty when not flagged.
    pub top_features: Vec<(String, f64)>,
    pub schema_hash: String,
    pub scanned_at: DateTime<Utc>,
    pub format: Option<DistFormat>,
    pub truncated: bool,
    pub lex_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl ScanVerdict {
    pub fn key(&self) -> (Ecosystem, String, String) {
        (self.ecosystem, self.name.clone(), self.version.clone())
    }

    pub fn is_error(&self) -> bool {
        self.disposition != Disposition::Classified
    }

    pub(crate) fn failed(
        ecosystem: Ecosystem,
        name: String,
        version: String,
        disposition: Disposition,
        error: String,
        schema_hash: &str,
        at: DateTime<Utc>,
    ) -> Self {
        ScanVerdict {
            ecosystem,
            name,
            version,
            disposition,
            error: Some(error),
            models: Vec::new(),
            flagged: false,
            top_features: Vec::new(),
            schema_hash: schema_hash.to_string(),
            scanned_at: at,
            format: None,
            truncated: false,
            lex_error: false,
            archive_url: None,
            sha256: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedModel {
    pub id: String,
    pub model: TreeEnsembleModel,
}

/// Models scanned together; all share one feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    models: Vec<NamedModel>,
}

impl ModelSet {
    pub fn new(models: Vec<NamedModel>) -> Result<Self, ScanError> {
        let first = models.first().ok_or(ScanError::NoModels)?;
        if let Some(other) = models.iter().find(|m| m.model.schema_hash != first.model.schema_hash) {
            return Err(ScanError::ModelSchemaMismatch(first.model.schema_hash.clone(), other.model.schema_hash.clone()));
        }
        Ok(ModelSet { models })
    }

    pub fn single(id: impl Into<String>, model: TreeEnsembleModel) -> Self {
        ModelSet { models: vec![NamedModel { id: id.into(), model }] }
    }

    pub fn models(&self) -> &[NamedModel] {
        &self.models
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.models[0].model.schema
    }

    pub fn schema_hash(&self) -> &str {
        &self.models[0].model.schema_hash
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub limits: IngestLimits,
    pub dictionary: SensitiveDictionary,
    pub top_features: usize,
    /// Fixed timestamp for reproducible sinks; `None` uses the wall clock.
    pub now: Option<DateTime<Utc>>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            limits: IngestLimits::default(),
            dictionary: SensitiveDictionary::default_seed(),
            top_features: 10,
            now: None,
        }
    }
}

impl ScanOptions {
    pub(crate) fn timestamp(&self) -> DateTime<Utc> {
        self.now.unwrap_or_else(Utc::now)
    }
}

/// Ingests, featurizes and classifies one archive. Never fails: ingest
/// problems come back as an `ingest_error` verdict.
pub fn scan_package(path: &Path, ecosystem: Ecosystem, models: &ModelSet, opts: &ScanOptions) -> ScanVerdict {
    let at = opts.timestamp();
    let artifact = match open_archive_with(path, ecosystem, opts.limits) {
        Ok(a) => a,
        Err(e) => {
            let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let (name, version) = split_archive_filename(&file_name).unwrap_or((file_name, String::new()));
            return ScanVerdict::failed(
                ecosystem,
                name,
                version,
                Disposition::IngestError,
                format!("{}: {e}", e.kind()),
                models.schema_hash(),
                at,
            );
        }
    };
    let ex = extract_detailed(&artifact, models.schema(), &opts.dictionary);
    let scores: Vec<ModelScore> = models
        .models
        .iter()
        .map(|m| {
            let p = m.model.predict_values(&ex.vector.values);
            ModelScore { model_id: m.id.clone(), probability: p.probability, label: p.label }
        })
        .collect();
    let flagger = models
        .models
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.label.is_malicious())
        .max_by(|a, b| a.1.probability.total_cmp(&b.1.probability));
    ScanVerdict {
        ecosystem,
        name: artifact.name.clone(),
        version: artifact.version.clone(),
        disposition: Disposition::Classified,
        error: None,
        flagged: flagger.is_some(),
        top_features: flagger.map(|(m, _)| m.model.top_features(opts.top_features)).unwrap_or_default(),
        models: scores,
        schema_hash: ex.vector.schema_hash,
        scanned_at: at,
        format: Some(artifact.format),
        truncated: ex.truncated,
        lex_error: ex.lex_error,
        archive_url: None,
        sha256: None,
    }
}
