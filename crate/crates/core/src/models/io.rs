//! Model file: a JSON document with reals written at 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tree::{Node, Tree};
use super::{Hyperparams, ModelError, ModelKind, TreeEnsemble, TreeEnsembleModel};
use crate::features::FeatureSchema;

pub const MODEL_FORMAT_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: String,
    kind: ModelKind,
    schema_version: String,
    schema_hash: String,
    schema: FeatureSchema,
    hyperparams: Hyperparams,
    decision_threshold: f64,
    base_raw_score: f64,
    degenerate: bool,
    trees: Vec<Vec<NodeRecord>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    feature_index: i32,
    threshold: f64,
    left: i32,
    right: i32,
    leaf_value: f64,
    split_gain: f64,
}

impl TreeEnsembleModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION.to_string(),
            kind: self.ensemble.kind,
            schema_version: self.schema.version.clone(),
            schema_hash: self.schema_hash.clone(),
            schema: self.schema.clone(),
            hyperparams: self.hyperparams,
            decision_threshold: self.decision_threshold,
            base_raw_score: self.ensemble.base_raw_score,
            degenerate: self.ensemble.degenerate,
            trees: self
                .ensemble
                .trees
                .iter()
                .map(|t| {
                    t.nodes
                        .iter()
                        .map(|n| NodeRecord {
                            feature_index: n.feature_index,
                            threshold: n.threshold,
                            left: n.left,
                            right: n.right,
                            leaf_value: n.leaf_value,
                            split_gain: n.split_gain,
                        })
                        .collect()
                })
                .collect(),
        };
        let value = serde_json::to_value(&file).expect("model serializes");
        let mut out = String::new();
        write_value(&value, 0, &mut out);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ModelError::MalformedModelFile(e.to_string()))?;
        match value.get("format_version") {
            Some(Value::String(v)) if v == MODEL_FORMAT_VERSION => {}
            Some(v) => {
                let found = v.as_str().map_or_else(|| v.to_string(), str::to_string);
                return Err(ModelError::VersionMismatch { found, supported: MODEL_FORMAT_VERSION.to_string() });
            }
            None => return Err(ModelError::MalformedModelFile("missing format_version".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelError::MalformedModelFile(e.to_string()))?;
        let malformed = |m: String| ModelError::MalformedModelFile(m);

        file.schema.validate().map_err(|e| malformed(e.to_string()))?;
        if file.schema_version != file.schema.version {
            return Err(malformed(format!(
                "schema_version {} disagrees with embedded schema {}",
                file.schema_version, file.schema.version
            )));
        }
        let computed = file.schema.hash();
        if computed != file.schema_hash {
            return Err(ModelError::SchemaHashMismatch { recorded: file.schema_hash, computed });
        }
        if file.hyperparams.kind() != file.kind {
            return Err(malformed(format!("kind {} but {} hyperparameters", file.kind, file.hyperparams.kind())));
        }
        file.hyperparams.validate()?;
        if !(0.0..=1.0).contains(&file.decision_threshold) || !file.base_raw_score.is_finite() {
            return Err(malformed("decision_threshold or base_raw_score out of range".into()));
        }
        let n_features = file.schema.len();
        let trees: Vec<Tree> = file
            .trees
            .into_iter()
            .map(|nodes| Tree {
                nodes: nodes
                    .into_iter()
                    .map(|n| Node {
                        feature_index: n.feature_index,
                        threshold: n.threshold,
                        left: n.left,
                        right: n.right,
                        leaf_value: n.leaf_value,
                        split_gain: n.split_gain,
                    })
                    .collect(),
            })
            .collect();
        for (i, t) in trees.iter().enumerate() {
            t.validate(n_features).map_err(|e| malformed(format!("tree {i}: {e}")))?;
        }
        if file.degenerate && trees.len() != 1 {
            return Err(malformed("degenerate model must hold exactly one tree".into()));
        }
        Ok(TreeEnsembleModel {
            ensemble: TreeEnsemble {
                kind: file.kind,
                trees,
                base_raw_score: file.base_raw_score,
                degenerate: file.degenerate,
                n_features,
            },
            schema: file.schema,
            schema_hash: file.schema_hash,
            hyperparams: file.hyperparams,
            decision_threshold: file.decision_threshold,
        })
    }
}

pub fn save_model(model: &TreeEnsembleModel, path: &Path) -> Result<(), ModelError> {
    let io = |source| ModelError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, model.to_json()).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_model(path: &Path) -> Result<TreeEnsembleModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    TreeEnsembleModel::from_json(&text)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => write!(out, "{i}").unwrap(),
            (_, Some(u), _) => write!(out, "{u}").unwrap(),
            (_, _, Some(f)) => write!(out, "{f:.16e}").unwrap(),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            // node records and short scalar lists stay on one line
            let flat = indent >= 4 || items.iter().all(|x| !x.is_object() && !x.is_array());
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if !flat {
                    newline(indent + 1, out);
                }
                write_value(x, indent + 1, out);
            }
            if !flat && !items.is_empty() {
                newline(indent, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let flat = indent >= 2;
            out.push('{');
            for (i, (k, x)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if !flat {
                    newline(indent + 1, out);
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                if !flat {
                    out.push(' ');
                }
                write_value(x, indent + 1, out);
            }
            if !flat && !map.is_empty() {
                newline(indent, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn newline(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}
