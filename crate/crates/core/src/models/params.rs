use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
    LogLoss,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Gini, Criterion::Entropy, Criterion::LogLoss];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::LogLoss => "log_loss",
        }
    }

    /// Node impurity from the count and positive count.
    pub fn impurity(self, n: f64, pos: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let p = pos / n;
        let q = 1.0 - p;
        match self {
            Criterion::Gini => 1.0 - p * p - q * q,
            Criterion::Entropy => -(xlogy(p, f64::log2) + xlogy(q, f64::log2)),
            Criterion::LogLoss => -(xlogy(p, f64::ln) + xlogy(q, f64::ln)),
        }
    }
}

fn xlogy(p: f64, log: fn(f64) -> f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * log(p)
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown criterion `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtParams {
    pub max_depth: usize,
    /// Fraction of features examined at each node, in (0, 1].
    pub max_features: f64,
    pub criterion: Criterion,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: 12,
            max_features: 1.0,
            criterion: Criterion::Gini,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub max_depth: usize,
    pub max_features: f64,
    pub criterion: Criterion,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub n_estimators: usize,
    /// Bootstrap sample size as a fraction of the training set, in (0, 1].
    pub max_samples: f64,
    /// Sample with replacement; off only for reduction tests.
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            max_depth: 12,
            max_features: 0.3,
            criterion: Criterion::Gini,
            min_samples_leaf: 1,
            min_samples_split: 2,
            n_estimators: 100,
            max_samples: 1.0,
            bootstrap: true,
        }
    }
}

impl RfParams {
    pub fn tree_params(&self) -> DtParams {
        DtParams {
            max_depth: self.max_depth,
            max_features: self.max_features,
            criterion: self.criterion,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Fraction of features sampled for each tree, in (0, 1].
    pub colsample_bytree: f64,
    pub learning_rate: f64,
    /// Minimum loss reduction to make a split.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    pub l2_lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_depth: 6,
            n_estimators: 100,
            colsample_bytree: 1.0,
            learning_rate: 0.3,
            gamma: 0.0,
            min_child_weight: 1.0,
            l2_lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Dt(DtParams),
    Rf(RfParams),
    Gbt(GbtParams),
}

impl Hyperparams {
    pub fn kind(&self) -> super::ModelKind {
        match self {
            Hyperparams::Dt(_) => super::ModelKind::Dt,
            Hyperparams::Rf(_) => super::ModelKind::Rf,
            Hyperparams::Gbt(_) => super::ModelKind::Gbt,
        }
    }

    pub fn default_for(kind: super::ModelKind) -> Self {
        match kind {
            super::ModelKind::Dt => Hyperparams::Dt(DtParams::default()),
            super::ModelKind::Rf => Hyperparams::Rf(RfParams::default()),
            super::ModelKind::Gbt => Hyperparams::Gbt(GbtParams::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Hyperparams::Dt(p) => validate_tree(p.max_depth, p.max_features, p.min_samples_leaf, p.min_samples_split),
            Hyperparams::Rf(p) => {
                validate_tree(p.max_depth, p.max_features, p.min_samples_leaf, p.min_samples_split)?;
                check(p.n_estimators >= 1 && p.n_estimators <= 5000, "n_estimators must be in [1, 5000]")?;
                check(unit(p.max_samples), "max_samples must be in (0, 1]")
            }
            Hyperparams::Gbt(p) => {
                check((1..=32).contains(&p.max_depth), "max_depth must be in [1, 32]")?;
                check(p.n_estimators >= 1 && p.n_estimators <= 5000, "n_estimators must be in [1, 5000]")?;
                check(unit(p.colsample_bytree), "colsample_bytree must be in (0, 1]")?;
                check(unit(p.learning_rate), "learning_rate must be in (0, 1]")?;
                check(p.gamma.is_finite() && p.gamma >= 0.0, "gamma must be finite and >= 0")?;
                check(
                    p.min_child_weight.is_finite() && p.min_child_weight >= 0.0,
                    "min_child_weight must be finite and >= 0",
                )?;
                check(p.l2_lambda.is_finite() && p.l2_lambda >= 0.0, "l2_lambda must be finite and >= 0")
            }
        }
    }
}

fn unit(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

fn check(ok: bool, msg: &str) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidHyperparams(msg.to_string()))
    }
}

fn validate_tree(max_depth: usize, max_features: f64, min_leaf: usize, min_split: usize) -> Result<(), ModelError> {
    check((1..=32).contains(&max_depth), "max_depth must be in [1, 32]")?;
    check(unit(max_features), "max_features must be in (0, 1]")?;
    check(min_leaf >= 1, "min_samples_leaf must be >= 1")?;
    check(min_split >= 2, "min_samples_split must be >= 2")
}

/// Number of features examined for a fraction `frac` of `n` (at least one).
pub(crate) fn feature_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64).ceil() as usize).clamp(1, n.max(1))
}
