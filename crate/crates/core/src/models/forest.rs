//! CART trees and bagged forests, for classification and regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::params::{feature_count, DtParams, RfParams};
use super::tree::{presort, ClassObjective, Grower, RegObjective, Tree};
use super::{ModelKind, TreeEnsemble};

const BOOTSTRAP_STREAM: u64 = 0xB007_57A9_5EED_0001;

/// Seed of tree `t`; tree 0 reuses the master seed.
pub(crate) fn tree_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn all_features(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn grow_classifier(p: &DtParams, x: &Matrix, y: &[bool], rows: &[usize], rng: &mut ChaCha8Rng) -> Tree {
    let cols = x.columns(rows);
    let targets: Vec<f64> = rows.iter().map(|&i| if y[i] { 1.0 } else { 0.0 }).collect();
    let obj = ClassObjective {
        y: &targets,
        criterion: p.criterion,
        min_leaf: p.min_samples_leaf as f64,
        min_split: p.min_samples_split as f64,
    };
    let order = presort(&cols);
    let per_node = feature_count(p.max_features, x.n_cols());
    Grower::new(&cols, all_features(x.n_cols()), order, &obj, p.max_depth, per_node, rng).grow()
}

pub(crate) fn fit_dt(p: &DtParams, x: &Matrix, y: &[bool], seed: u64) -> TreeEnsemble {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = grow_classifier(p, x, y, &rows, &mut rng);
    TreeEnsemble { kind: ModelKind::Dt, trees: vec![tree], base_raw_score: 0.0, degenerate: false, n_features: x.n_cols() }
}

fn bootstrap_rows(n: usize, frac: f64, seed: u64) -> Vec<usize> {
    let m = ((frac * n as f64).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BOOTSTRAP_STREAM);
    let mut rows: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    rows.sort_unstable();
    rows
}

pub(crate) fn fit_rf(p: &RfParams, x: &Matrix, y: &[bool], seed: u64) -> TreeEnsemble {
    let tp = p.tree_params();
    let n = x.n_rows();
    let trees = (0..p.n_estimators)
        .map(|t| {
            let s = tree_seed(seed, t);
            let rows = if p.bootstrap { bootstrap_rows(n, p.max_samples, s) } else { (0..n).collect() };
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            grow_classifier(&tp, x, y, &rows, &mut rng)
        })
        .collect();
    TreeEnsemble { kind: ModelKind::Rf, trees, base_raw_score: 0.0, degenerate: false, n_features: x.n_cols() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: f64,
    pub min_samples_leaf: usize,
    pub max_samples: f64,
}

impl Default for RegressionForestParams {
    fn default() -> Self {
        RegressionForestParams { n_estimators: 50, max_depth: 8, max_features: 1.0, min_samples_leaf: 1, max_samples: 1.0 }
    }
}

/// Bagged MSE regression trees; the optimizer's surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionForest {
    pub trees: Vec<Tree>,
}

impl RegressionForest {
    pub fn fit(p: &RegressionForestParams, x: &Matrix, t: &[f64], seed: u64) -> Self {
        let n = x.n_rows();
        assert_eq!(n, t.len(), "targets must match rows");
        if n == 0 {
            return RegressionForest { trees: vec![Tree::leaf(0.0)] };
        }
        let per_node = feature_count(p.max_features, x.n_cols());
        let trees = (0..p.n_estimators.max(1))
            .map(|k| {
                let s = tree_seed(seed, k);
                let rows = bootstrap_rows(n, p.max_samples, s);
                let cols = x.columns(&rows);
                let targets: Vec<f64> = rows.iter().map(|&i| t[i]).collect();
                let obj = RegObjective { t: &targets, min_leaf: p.min_samples_leaf as f64, min_split: 2.0 };
                let order = presort(&cols);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                Grower::new(&cols, all_features(x.n_cols()), order, &obj, p.max_depth, per_node, &mut rng).grow()
            })
            .collect();
        RegressionForest { trees }
    }

    /// Mean and population std of the per-tree predictions.
    pub fn predict_dist(&self, row: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(row)).collect();
        (crate::stats::mean(&preds), crate::stats::population_std(&preds))
    }
}
