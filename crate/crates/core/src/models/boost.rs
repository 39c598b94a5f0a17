//! Second-order gradient boosting with logistic loss.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::params::{feature_count, GbtParams, Hyperparams};
use super::tree::{presort, Grower, Objective};
use super::{ModelError, ModelKind, TreeEnsemble};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of raw scores `f` against labels `y`.
pub fn logistic_loss(f: &[f64], y: &[bool]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            // log(1 + e^-z) for positives, log(1 + e^z) for negatives
            let m = if t { -z } else { z };
            if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            }
        })
        .sum();
    total / f.len() as f64
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradStats {
    g: f64,
    h: f64,
    n: f64,
}

struct GradObjective<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
    learning_rate: f64,
}

impl GradObjective<'_> {
    fn term(&self, s: &GradStats) -> f64 {
        let d = s.h + self.lambda;
        if d > 0.0 {
            s.g * s.g / d
        } else {
            0.0
        }
    }

    fn raw_gain(&self, p: &GradStats, l: &GradStats, r: &GradStats) -> f64 {
        0.5 * (self.term(l) + self.term(r) - self.term(p))
    }
}

impl Objective for GradObjective<'_> {
    type Stats = GradStats;

    fn add(&self, st: &mut GradStats, s: u32) {
        st.g += self.g[s as usize];
        st.h += self.h[s as usize];
        st.n += 1.0;
    }

    fn sub(&self, a: &GradStats, b: &GradStats) -> GradStats {
        GradStats { g: a.g - b.g, h: a.h - b.h, n: a.n - b.n }
    }

    fn can_split(&self, st: &GradStats) -> bool {
        st.n >= 2.0
    }

    fn score(&self, p: &GradStats, l: &GradStats, r: &GradStats) -> Option<f64> {
        if l.h < self.min_child_weight || r.h < self.min_child_weight {
            return None;
        }
        if l.h + self.lambda <= 0.0 || r.h + self.lambda <= 0.0 {
            return None;
        }
        let gain = self.raw_gain(p, l, r) - self.gamma;
        (gain > 0.0).then_some(gain)
    }

    fn gain(&self, p: &GradStats, l: &GradStats, r: &GradStats, _: f64) -> f64 {
        self.raw_gain(p, l, r).max(0.0)
    }

    fn leaf_value(&self, st: &GradStats) -> f64 {
        let d = st.h + self.lambda;
        if d > 0.0 {
            -self.learning_rate * st.g / d
        } else {
            0.0
        }
    }

    fn count(&self, st: &GradStats) -> f64 {
        st.n
    }
}

/// Training loss before the first round and after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtTrace {
    pub losses: Vec<f64>,
}

pub(crate) fn fit_gbt(p: &GbtParams, x: &Matrix, y: &[bool], seed: u64, mut trace: Option<&mut GbtTrace>) -> TreeEnsemble {
    let n = x.n_rows();
    let n_features = x.n_cols();
    let rows: Vec<usize> = (0..n).collect();
    let cols = x.columns(&rows);
    let sorted = presort(&cols);
    let per_tree = feature_count(p.colsample_bytree, n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base = 0.0;
    let mut f = vec![base; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    if let Some(t) = trace.as_deref_mut() {
        t.losses.push(logistic_loss(&f, y));
    }
    let mut trees = Vec::with_capacity(p.n_estimators);
    for _ in 0..p.n_estimators {
        for i in 0..n {
            let s = sigmoid(f[i]);
            g[i] = s - if y[i] { 1.0 } else { 0.0 };
            h[i] = s * (1.0 - s);
        }
        let active: Vec<usize> = if per_tree < n_features {
            let mut v = index::sample(&mut rng, n_features, per_tree).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..n_features).collect()
        };
        let order: Vec<Vec<u32>> = active.iter().map(|&j| sorted[j].clone()).collect();
        let obj = GradObjective {
            g: &g,
            h: &h,
            lambda: p.l2_lambda,
            gamma: p.gamma,
            min_child_weight: p.min_child_weight,
            learning_rate: p.learning_rate,
        };
        let k = active.len();
        let tree = Grower::new(&cols, active, order, &obj, p.max_depth, k, &mut rng).grow();
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += tree.predict(x.row(i));
        }
        if let Some(t) = trace.as_deref_mut() {
            t.losses.push(logistic_loss(&f, y));
        }
        trees.push(tree);
    }
    TreeEnsemble { kind: ModelKind::Gbt, trees, base_raw_score: base, degenerate: false, n_features }
}

/// Trains a boosted ensemble and records the training loss per round.
pub fn train_gbt_traced(p: &GbtParams, x: &Matrix, y: &[bool], seed: u64) -> Result<(TreeEnsemble, GbtTrace), ModelError> {
    let hp = Hyperparams::Gbt(*p);
    hp.validate()?;
    super::check_training_set(x, y)?;
    let mut trace = GbtTrace { losses: Vec::new() };
    if let Some(prob) = super::single_class(y) {
        return Ok((TreeEnsemble::constant(ModelKind::Gbt, prob, x.n_cols()), trace));
    }
    let e = fit_gbt(p, x, y, seed, Some(&mut trace));
    Ok((e, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_leaf_weights() {
        let x = Matrix::from_rows(&[[0.0], [1.0]], 1).unwrap();
        let y = [false, true];
        let p = GbtParams {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            gamma: 0.0,
            l2_lambda: 0.0,
            min_child_weight: 0.0,
            colsample_bytree: 1.0,
        };
        let (e, _) = train_gbt_traced(&p, &x, &y, 0).unwrap();
        let t = &e.trees[0];
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.predict(&[0.0]), -2.0);
        assert_eq!(t.predict(&[1.0]), 2.0);
    }

    #[test]
    fn loss_is_stable_for_extremes() {
        assert!((logistic_loss(&[0.0], &[true]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logistic_loss(&[800.0], &[true]) < 1e-300);
        assert!((logistic_loss(&[-800.0], &[true]) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
