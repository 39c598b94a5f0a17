//! Tree learners over feature vectors: CART decision trees, random forests
//! and second-order gradient-boosted trees, plus the portable model file.
//!
//! Two layers:
//!
//! - [`TreeEnsemble`] is schema-free and trains on plain rows. The tuning
//!   harness and the optimizer surrogate use it directly.
//! - [`TreeEnsembleModel`] binds an ensemble to a [`FeatureSchema`] and its
//!   hash, carries the hyperparameters and decision threshold, and is what
//!   gets saved, loaded and used by the scanner.

mod boost;
mod forest;
mod io;
mod matrix;
mod params;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureSchema, FeatureVector};

pub use boost::{logistic_loss, sigmoid, train_gbt_traced, GbtTrace};
pub use forest::{RegressionForest, RegressionForestParams};
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use matrix::Matrix;
pub use params::{Criterion, DtParams, GbtParams, Hyperparams, RfParams};
pub use tree::{Node, Tree};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("row {row} feature {feature} is not finite")]
    NonFinite { row: usize, feature: usize },
    #[error("feature vector schema {found} does not match model schema {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("unsupported model format version {found} (supported: {supported})")]
    VersionMismatch { found: String, supported: String },
    #[error("schema hash recorded in model ({recorded}) does not match its schema ({computed})")]
    SchemaHashMismatch { recorded: String, computed: String },
    #[error("malformed model file: {0}")]
    MalformedModelFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Rf,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Gbt => "gbt",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dt" | "tree" | "decision_tree" => Ok(ModelKind::Dt),
            "rf" | "forest" | "random_forest" => Ok(ModelKind::Rf),
            "gbt" | "xgb" | "xgboost" | "boosting" => Ok(ModelKind::Gbt),
            _ => Err(format!("unknown learner `{s}` (expected dt, rf or gbt)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    pub fn is_malicious(self) -> bool {
        self == Label::Malicious
    }
}

/// A trained, schema-free tree ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub kind: ModelKind,
    pub trees: Vec<Tree>,
    /// Initial raw score for boosting; unused by dt/rf.
    pub base_raw_score: f64,
    /// Trained on one class only; `trees[0]` is a single leaf holding the probability.
    pub degenerate: bool,
    pub n_features: usize,
}

impl TreeEnsemble {
    /// Trains the learner selected by `hp` on rows of `x`.
    pub fn fit(hp: &Hyperparams, x: &Matrix, y: &[bool], seed: u64) -> Result<Self, ModelError> {
        hp.validate()?;
        check_training_set(x, y)?;
        if let Some(p) = single_class(y) {
            log::warn!("training set has one class; fitting a constant model");
            return Ok(TreeEnsemble::constant(hp.kind(), p, x.n_cols()));
        }
        Ok(match hp {
            Hyperparams::Dt(p) => forest::fit_dt(p, x, y, seed),
            Hyperparams::Rf(p) => forest::fit_rf(p, x, y, seed),
            Hyperparams::Gbt(p) => boost::fit_gbt(p, x, y, seed, None),
        })
    }

    pub fn constant(kind: ModelKind, probability: f64, n_features: usize) -> Self {
        TreeEnsemble {
            kind,
            trees: vec![Tree::leaf(probability)],
            base_raw_score: 0.0,
            degenerate: true,
            n_features,
        }
    }

    /// Boosting raw score; only meaningful for gbt.
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_raw_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Positive-class probability for one row.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        if self.degenerate {
            return self.trees.first().map_or(0.5, |t| t.predict(row));
        }
        match self.kind {
            ModelKind::Gbt => sigmoid(self.raw_score(row)),
            ModelKind::Dt | ModelKind::Rf => {
                if self.trees.is_empty() {
                    return 0.5;
                }
                let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
                (sum / self.trees.len() as f64).clamp(0.0, 1.0)
            }
        }
    }

    pub fn predict_proba_matrix(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_proba(&x.row(i))).collect()
    }

    /// Normalized importance per feature index (sums to 1, or all zeros).
    pub fn importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        if self.degenerate {
            return total;
        }
        match self.kind {
            ModelKind::Gbt => {
                for t in &self.trees {
                    t.accumulate_gain(&mut total);
                }
            }
            ModelKind::Dt | ModelKind::Rf => {
                for t in &self.trees {
                    let mut per = vec![0.0; self.n_features];
                    t.accumulate_gain(&mut per);
                    normalize(&mut per);
                    for (a, b) in total.iter_mut().zip(&per) {
                        *a += b;
                    }
                }
            }
        }
        normalize(&mut total);
        total
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

fn single_class(y: &[bool]) -> Option<f64> {
    if y.iter().all(|&b| b) {
        Some(1.0)
    } else if y.iter().all(|&b| !b) {
        Some(0.0)
    } else {
        None
    }
}

fn check_training_set(x: &Matrix, y: &[bool]) -> Result<(), ModelError> {
    if x.n_rows() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.n_rows(), labels: y.len() });
    }
    if y.len() < 2 {
        return Err(ModelError::TooFewSamples(y.len()));
    }
    for i in 0..x.n_rows() {
        if let Some(f) = x.row(i).iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row: i, feature: f });
        }
    }
    Ok(())
}

/// A schema-bound model: what gets saved, loaded and scanned with.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsembleModel {
    pub ensemble: TreeEnsemble,
    pub schema: FeatureSchema,
    pub schema_hash: String,
    pub hyperparams: Hyperparams,
    pub decision_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: Label,
}

impl TreeEnsembleModel {
    pub fn kind(&self) -> ModelKind {
        self.ensemble.kind
    }

    pub fn is_degenerate(&self) -> bool {
        self.ensemble.degenerate
    }

    pub fn check_schema(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if x.schema_hash != self.schema_hash || x.values.len() != self.schema.len() {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema_hash.clone(),
                found: x.schema_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, ModelError> {
        self.check_schema(x)?;
        Ok(self.predict_values(&x.values))
    }

    /// Predicts on raw values already known to follow the model schema.
    pub fn predict_values(&self, values: &[f64]) -> Prediction {
        let probability = self.ensemble.predict_proba(values);
        let label = if probability > self.decision_threshold {
            Label::Malicious
        } else {
            Label::Benign
        };
        Prediction { probability, label }
    }

    /// Importance by feature name, normalized to sum 1; all zeros when degenerate.
    pub fn feature_importance(&self) -> BTreeMap<String, f64> {
        self.schema
            .names
            .iter()
            .cloned()
            .zip(self.ensemble.importances())
            .collect()
    }

    /// The `n` most important features, highest first, ties by schema order.
    pub fn top_features(&self, n: usize) -> Vec<(String, f64)> {
        let imp = self.ensemble.importances();
        let mut idx: Vec<usize> = (0..imp.len()).filter(|&i| imp[i] > 0.0).collect();
        idx.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|i| (self.schema.names[i].clone(), imp[i]))
            .collect()
    }
}

/// Trains and binds a model of the kind selected by `hp`.
pub fn train(
    schema: &FeatureSchema,
    xs: &[FeatureVector],
    y: &[bool],
    hp: &Hyperparams,
    seed: u64,
) -> Result<TreeEnsembleModel, ModelError> {
    let schema_hash = schema.hash();
    for x in xs {
        if x.schema_hash != schema_hash || x.values.len() != schema.len() {
            return Err(ModelError::SchemaMismatch { expected: schema_hash, found: x.schema_hash.clone() });
        }
    }
    let rows: Vec<&[f64]> = xs.iter().map(|x| x.values.as_slice()).collect();
    let matrix = Matrix::from_rows(&rows, schema.len())?;
    let ensemble = TreeEnsemble::fit(hp, &matrix, y, seed)?;
    Ok(TreeEnsembleModel {
        ensemble,
        schema: schema.clone(),
        schema_hash,
        hyperparams: *hp,
        decision_threshold: 0.5,
    })
}

pub fn train_dt(
    schema: &FeatureSchema,
    xs: &[FeatureVector],
    y: &[bool],
    hp: &DtParams,
    seed: u64,
) -> Result<TreeEnsembleModel, ModelError> {
    train(schema, xs, y, &Hyperparams::Dt(*hp), seed)
}

pub fn train_rf(
    schema: &FeatureSchema,
    xs: &[FeatureVector],
    y: &[bool],
    hp: &RfParams,
    seed: u64,
) -> Result<TreeEnsembleModel, ModelError> {
    train(schema, xs, y, &Hyperparams::Rf(*hp), seed)
}

pub fn train_gbt(
    schema: &FeatureSchema,
    xs: &[FeatureVector],
    y: &[bool],
    hp: &GbtParams,
    seed: u64,
) -> Result<TreeEnsembleModel, ModelError> {
    train(schema, xs, y, &Hyperparams::Gbt(*hp), seed)
}

pub fn predict(model: &TreeEnsembleModel, x: &FeatureVector) -> Result<Prediction, ModelError> {
    model.predict(x)
}

pub fn feature_importance(model: &TreeEnsembleModel) -> BTreeMap<String, f64> {
    model.feature_importance()
}
