//! Search spaces and the sequential model-based optimizer.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cv::{cross_validate, CvConfig};
use super::metrics::MetricsReport;
use super::TuningError;
use crate::models::{Hyperparams, Matrix, ModelKind, RegressionForest, RegressionForestParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamRange {
    Int { lo: i64, hi: i64 },
    Float {
        lo: f64,
        hi: f64,
        #[serde(default)]
        log: bool,
    },
    Categorical { values: Vec<String> },
}

impl ParamRange {
    fn validate(&self) -> Result<(), String> {
        match self {
            ParamRange::Int { lo, hi } if lo > hi => Err(format!("int range [{lo}, {hi}] is empty")),
            ParamRange::Float { lo, hi, log } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    Err(format!("float range [{lo}, {hi}] is not a finite interval"))
                } else if *log && *lo <= 0.0 {
                    Err("log-scaled range needs lo > 0".into())
                } else {
                    Ok(())
                }
            }
            ParamRange::Categorical { values } if values.is_empty() => Err("no categories".into()),
            _ => Ok(()),
        }
    }

    /// Maps a unit coordinate to a parameter value.
    fn decode(&self, u: f64) -> Value {
        let u = u.clamp(0.0, 1.0);
        match self {
            ParamRange::Int { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                Value::from((*lo + (u * span).floor() as i64).min(*hi))
            }
            ParamRange::Float { lo, hi, log } => {
                let v = if *log { (lo.ln() + u * (hi.ln() - lo.ln())).exp() } else { lo + u * (hi - lo) };
                Value::from(v.clamp(*lo, *hi))
            }
            ParamRange::Categorical { values } => {
                let i = ((u * values.len() as f64).floor() as usize).min(values.len() - 1);
                Value::from(values[i].clone())
            }
        }
    }

    fn encode(&self, v: &Value) -> Option<f64> {
        match self {
            ParamRange::Int { lo, hi } => {
                let x = v.as_i64()?;
                ((*lo..=*hi).contains(&x)).then(|| (x - lo) as f64 / (hi - lo + 1) as f64 + 0.5 / (hi - lo + 1) as f64)
            }
            ParamRange::Float { lo, hi, log } => {
                let x = v.as_f64()?;
                if !(*lo..=*hi).contains(&x) {
                    return None;
                }
                Some(if hi == lo {
                    0.5
                } else if *log {
                    (x.ln() - lo.ln()) / (hi.ln() - lo.ln())
                } else {
                    (x - lo) / (hi - lo)
                })
            }
            ParamRange::Categorical { values } => {
                let s = v.as_str()?;
                let i = values.iter().position(|c| c == s)?;
                Some((i as f64 + 0.5) / values.len() as f64)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub range: ParamRange,
}

/// Box of hyperparameters for one learner; unlisted parameters keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kind: ModelKind,
    pub params: Vec<ParamSpec>,
}

fn int(name: &str, lo: i64, hi: i64) -> ParamSpec {
    ParamSpec { name: name.into(), range: ParamRange::Int { lo, hi } }
}

fn float(name: &str, lo: f64, hi: f64, log: bool) -> ParamSpec {
    ParamSpec { name: name.into(), range: ParamRange::Float { lo, hi, log } }
}

fn criteria() -> ParamSpec {
    ParamSpec {
        name: "criterion".into(),
        range: ParamRange::Categorical { values: vec!["gini".into(), "entropy".into(), "log_loss".into()] },
    }
}

impl SearchSpace {
    pub fn default_for(kind: ModelKind) -> Self {
        let tree = || {
            vec![
                int("max_depth", 1, 20),
                float("max_features", 0.1, 1.0, false),
                criteria(),
                int("min_samples_leaf", 1, 10),
                int("min_samples_split", 2, 20),
            ]
        };
        let params = match kind {
            ModelKind::Dt => tree(),
            ModelKind::Rf => {
                let mut p = tree();
                p.push(int("n_estimators", 10, 200));
                p.push(float("max_samples", 0.5, 1.0, false));
                p
            }
            ModelKind::Gbt => vec![
                int("max_depth", 2, 8),
                int("n_estimators", 20, 300),
                float("colsample_bytree", 0.3, 1.0, false),
                float("learning_rate", 0.01, 0.5, true),
                float("gamma", 0.0, 5.0, false),
                float("min_child_weight", 0.0, 10.0, false),
            ],
        };
        SearchSpace { kind, params }
    }

    pub fn from_json(text: &str) -> Result<Self, TuningError> {
        let s: SearchSpace = serde_json::from_str(text).map_err(|e| TuningError::InvalidSpace(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<(), TuningError> {
        let bad = |m: String| TuningError::InvalidSpace(m);
        if self.params.is_empty() {
            return Err(bad("no parameters".into()));
        }
        let defaults = default_object(self.kind);
        let mut seen = std::collections::HashSet::new();
        for p in &self.params {
            if p.name == "kind" || !defaults.contains_key(&p.name) {
                return Err(bad(format!("`{}` is not a {} hyperparameter", p.name, self.kind)));
            }
            if !seen.insert(&p.name) {
                return Err(bad(format!("`{}` listed twice", p.name)));
            }
            p.range.validate().map_err(|m| bad(format!("{}: {m}", p.name)))?;
        }
        // every corner of the box must be a valid configuration
        for u in [0.0, 1.0] {
            self.decode(&vec![u; self.dim()]).map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    pub fn decode(&self, unit: &[f64]) -> Result<Hyperparams, TuningError> {
        let mut obj = default_object(self.kind);
        for (p, &u) in self.params.iter().zip(unit) {
            obj.insert(p.name.clone(), p.range.decode(u));
        }
        let hp: Hyperparams =
            serde_json::from_value(Value::Object(obj)).map_err(|e| TuningError::InvalidSpace(e.to_string()))?;
        hp.validate()?;
        Ok(hp)
    }

    /// Unit coordinates of `hp`, or `None` when some listed value is outside the space.
    pub fn encode(&self, hp: &Hyperparams) -> Option<Vec<f64>> {
        if hp.kind() != self.kind {
            return None;
        }
        let Value::Object(obj) = serde_json::to_value(hp).ok()? else {
            return None;
        };
        self.params.iter().map(|p| p.range.encode(obj.get(&p.name)?)).collect()
    }

    pub fn contains(&self, hp: &Hyperparams) -> bool {
        self.encode(hp).is_some()
    }

    fn sample_unit(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random::<f64>()).collect()
    }
}

fn default_object(kind: ModelKind) -> serde_json::Map<String, Value> {
    match serde_json::to_value(Hyperparams::default_for(kind)) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("hyperparameters serialize to an object"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Smbo,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smbo" | "bo" => Ok(Strategy::Smbo),
            "random" => Ok(Strategy::Random),
            _ => Err(format!("unknown strategy `{s}` (expected smbo or random)")),
        }
    }
}

/// What an objective evaluation reports back to the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    pub precision: f64,
    pub recall: f64,
    pub report: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: usize,
    pub hp: Hyperparams,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub best_index: usize,
    pub best_hp: Hyperparams,
    pub best_report: Option<MetricsReport>,
    pub trials: Vec<Trial>,
}

const EI_CANDIDATES: usize = 256;
const EI_XI: f64 = 0.01;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    let d = mu - best - EI_XI;
    if sigma <= 1e-12 {
        return d.max(0.0);
    }
    let z = d / sigma;
    d * normal_cdf(z) + sigma * normal_pdf(z)
}

/// Maximizes mean precision of `objective` over `space`.
///
/// `smbo` evaluates `max(5, budget/4)` random points, then repeatedly fits a
/// random-forest regressor to the history and evaluates the random candidate
/// with the highest expected improvement. The winner has the highest
/// precision, then the highest recall, then the lowest trial index.
pub fn optimize_hyperparams<F>(
    space: &SearchSpace,
    budget: usize,
    strategy: Strategy,
    seed: u64,
    mut objective: F,
) -> Result<TuningOutcome, TuningError>
where
    F: FnMut(&Hyperparams) -> Result<TrialScore, TuningError>,
{
    if budget == 0 {
        return Err(TuningError::EmptyBudget);
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_init = match strategy {
        Strategy::Random => budget,
        Strategy::Smbo => (budget / 4).max(5).min(budget),
    };
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    let mut best: Option<(usize, Option<MetricsReport>)> = None;

    for t in 0..budget {
        let unit = if t < n_init {
            space.sample_unit(&mut rng)
        } else {
            propose(space, &units, &trials, &mut rng, seed.wrapping_add(t as u64))
        };
        let hp = space.decode(&unit)?;
        let score = objective(&hp)?;
        log::debug!("trial {t}: precision {:.4} recall {:.4}", score.precision, score.recall);
        trials.push(Trial { trial_index: t, hp, mean_precision: score.precision, mean_recall: score.recall });
        units.push(unit);
        let better = match &best {
            None => true,
            Some((b, _)) => {
                let (bp, br) = (trials[*b].mean_precision, trials[*b].mean_recall);
                score.precision > bp || (score.precision == bp && score.recall > br)
            }
        };
        if better {
            best = Some((t, score.report));
        }
    }
    let (best_index, best_report) = best.expect("budget >= 1");
    Ok(TuningOutcome { best_index, best_hp: trials[best_index].hp, best_report, trials })
}

fn propose(space: &SearchSpace, units: &[Vec<f64>], trials: &[Trial], rng: &mut ChaCha8Rng, seed: u64) -> Vec<f64> {
    let x = Matrix::from_rows(units, space.dim()).expect("unit rows share the space dimension");
    let t: Vec<f64> = trials.iter().map(|t| t.mean_precision).collect();
    let best = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let params = RegressionForestParams { n_estimators: 32, max_depth: 8, max_features: 1.0, min_samples_leaf: 1, max_samples: 1.0 };
    let forest = RegressionForest::fit(&params, &x, &t, seed);
    let mut choice = space.sample_unit(rng);
    let (mu, sd) = forest.predict_dist(&choice);
    let mut top = expected_improvement(mu, sd, best);
    for _ in 1..EI_CANDIDATES {
        let c = space.sample_unit(rng);
        let (mu, sd) = forest.predict_dist(&c);
        let ei = expected_improvement(mu, sd, best);
        if ei > top {
            top = ei;
            choice = c;
        }
    }
    choice
}

/// [`optimize_hyperparams`] with repeated CV precision as the objective.
pub fn optimize_cv(
    x: &Matrix,
    y: &[bool],
    space: &SearchSpace,
    budget: usize,
    strategy: Strategy,
    cv: &CvConfig,
    seed: u64,
) -> Result<TuningOutcome, TuningError> {
    optimize_hyperparams(space, budget, strategy, seed, |hp| {
        let r = cross_validate(x, y, hp, cv)?;
        Ok(TrialScore { precision: r.precision.mean, recall: r.recall.mean, report: Some(r) })
    })
}

/// One JSON object per line: `{trial_index, hp, mean_precision, mean_recall}`.
pub fn write_trial_log<W: Write>(mut w: W, trials: &[Trial]) -> std::io::Result<()> {
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_trial_log<R: BufRead>(r: R) -> Result<Vec<Trial>, TuningError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| TuningError::TrialLog { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
