use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{Confusion, Metrics, MetricsReport};
use super::TuningError;
use crate::dataset::Dataset;
use crate::models::{Hyperparams, Matrix, TreeEnsemble};
use crate::Ecosystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k: 5, repeats: 10, seed: 0 }
    }
}

impl CvConfig {
    fn check(&self) -> Result<(), TuningError> {
        if self.k < 2 {
            return Err(TuningError::InvalidK(self.k));
        }
        if self.repeats < 1 {
            return Err(TuningError::InvalidRepeats);
        }
        Ok(())
    }
}

/// Splits indices into `k` folds, each class spread round-robin after a seeded shuffle.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TuningError> {
    check_classes(labels, k)?;
    Ok(stratified_folds_by(&labels.iter().map(|&l| u8::from(l)).collect::<Vec<_>>(), k, seed))
}

fn check_classes(labels: &[bool], k: usize) -> Result<(), TuningError> {
    if k < 2 {
        return Err(TuningError::InvalidK(k));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos < k {
        return Err(TuningError::TooFewPositives { have: pos, k });
    }
    if neg < k {
        return Err(TuningError::TooFewNegatives { have: neg, k });
    }
    Ok(())
}

/// Generalized stratification over arbitrary stratum keys. Strata are
/// visited in key order and the fold cursor carries over between strata,
/// so fold sizes differ by at most one as well.
pub fn stratified_folds_by<K: Ord + Copy>(strata: &[K], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = k.max(1);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        for i in idx {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

pub(crate) fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    let mut z = seed ^ ((repeat as u64) << 32) ^ (fold as u64);
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Anything that can be trained on one split and predict labels on another.
pub trait Learner {
    fn fit_predict(&self, x_train: &Matrix, y_train: &[bool], x_test: &Matrix, seed: u64)
        -> Result<Vec<bool>, TuningError>;
}

impl Learner for Hyperparams {
    fn fit_predict(&self, x_train: &Matrix, y_train: &[bool], x_test: &Matrix, seed: u64) -> Result<Vec<bool>, TuningError> {
        let model = TreeEnsemble::fit(self, x_train, y_train, seed)?;
        Ok((0..x_test.n_rows()).map(|i| model.predict_proba(x_test.row(i)) > 0.5).collect())
    }
}

fn split(folds: &[Vec<usize>], f: usize) -> (Vec<usize>, &[usize]) {
    let mut train: Vec<usize> = folds.iter().enumerate().filter(|(j, _)| *j != f).flat_map(|(_, v)| v.iter().copied()).collect();
    train.sort_unstable();
    (train, &folds[f])
}

fn pick(y: &[bool], idx: &[usize]) -> Vec<bool> {
    idx.iter().map(|&i| y[i]).collect()
}

/// Repeated stratified k-fold CV: repeat `r` in `1..=repeats` draws folds with `seed + r`.
pub fn cross_validate_with<L: Learner + ?Sized>(
    learner: &L,
    x: &Matrix,
    y: &[bool],
    cv: &CvConfig,
) -> Result<MetricsReport, TuningError> {
    cv.check()?;
    if x.n_rows() != y.len() {
        return Err(TuningError::LengthMismatch(x.n_rows(), y.len()));
    }
    let mut folds_out = Vec::with_capacity(cv.k * cv.repeats);
    for r in 1..=cv.repeats {
        let folds = stratified_folds(y, cv.k, cv.seed.wrapping_add(r as u64))?;
        for f in 0..cv.k {
            let (train, test) = split(&folds, f);
            let pred = learner.fit_predict(&x.select_rows(&train), &pick(y, &train), &x.select_rows(test), fold_seed(cv.seed, r, f))?;
            folds_out.push(Confusion::from_labels(&pick(y, test), &pred)?.metrics());
        }
    }
    Ok(MetricsReport::from_folds(folds_out))
}

pub fn cross_validate(x: &Matrix, y: &[bool], hp: &Hyperparams, cv: &CvConfig) -> Result<MetricsReport, TuningError> {
    cross_validate_with(hp, x, y, cv)
}

pub fn cross_validate_dataset(ds: &Dataset, hp: &Hyperparams, cv: &CvConfig) -> Result<MetricsReport, TuningError> {
    cross_validate_with(hp, &ds.matrix(), &ds.labels(), cv)
}

/// CV of a model trained on all slices and scored on the whole held-out
/// fold as well as on each slice of it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlicedReport {
    pub overall: MetricsReport,
    pub per_slice: BTreeMap<Ecosystem, MetricsReport>,
}

pub fn cross_validate_sliced<L: Learner + ?Sized>(
    learner: &L,
    x: &Matrix,
    y: &[bool],
    slices: &[Ecosystem],
    cv: &CvConfig,
) -> Result<SlicedReport, TuningError> {
    cv.check()?;
    if x.n_rows() != y.len() || slices.len() != y.len() {
        return Err(TuningError::LengthMismatch(x.n_rows(), y.len().min(slices.len())));
    }
    check_classes(y, cv.k)?;
    let strata: Vec<(bool, Ecosystem)> = y.iter().copied().zip(slices.iter().copied()).collect();
    let mut overall = Vec::new();
    let mut per: BTreeMap<Ecosystem, Vec<Metrics>> = BTreeMap::new();
    for r in 1..=cv.repeats {
        let folds = stratified_folds_by(&strata, cv.k, cv.seed.wrapping_add(r as u64));
        for f in 0..cv.k {
            let (train, test) = split(&folds, f);
            let pred = learner.fit_predict(&x.select_rows(&train), &pick(y, &train), &x.select_rows(test), fold_seed(cv.seed, r, f))?;
            let truth = pick(y, test);
            overall.push(Confusion::from_labels(&truth, &pred)?.metrics());
            let mut by: BTreeMap<Ecosystem, (Vec<bool>, Vec<bool>)> = BTreeMap::new();
            for (j, &i) in test.iter().enumerate() {
                let e = by.entry(slices[i]).or_default();
                e.0.push(truth[j]);
                e.1.push(pred[j]);
            }
            for (eco, (t, p)) in by {
                per.entry(eco).or_default().push(Confusion::from_labels(&t, &p)?.metrics());
            }
        }
    }
    Ok(SlicedReport {
        overall: MetricsReport::from_folds(overall),
        per_slice: per.into_iter().map(|(e, m)| (e, MetricsReport::from_folds(m))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(neg: usize, pos: usize) -> Vec<bool> {
        (0..neg + pos).map(|i| i >= neg).collect()
    }

    #[test]
    fn exact_division() {
        let y = labels(90, 10);
        let folds = stratified_folds(&y, 5, 7).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 20);
            assert_eq!(f.iter().filter(|&&i| y[i]).count(), 2);
        }
    }

    #[test]
    fn plus_minus_one() {
        let y = labels(91, 9);
        let folds = stratified_folds(&y, 5, 7).unwrap();
        for f in &folds {
            let p = f.iter().filter(|&&i| y[i]).count();
            assert!((1..=2).contains(&p));
            assert_eq!(f.len(), 20);
        }
    }

    #[test]
    fn too_few() {
        assert!(matches!(stratified_folds(&labels(96, 4), 5, 0), Err(TuningError::TooFewPositives { have: 4, k: 5 })));
        assert!(matches!(stratified_folds(&labels(3, 40), 5, 0), Err(TuningError::TooFewNegatives { .. })));
        assert!(matches!(stratified_folds(&labels(30, 40), 1, 0), Err(TuningError::InvalidK(1))));
    }

    struct Majority;

    impl Learner for Majority {
        fn fit_predict(&self, _: &Matrix, y: &[bool], x: &Matrix, _: u64) -> Result<Vec<bool>, TuningError> {
            let pos = y.iter().filter(|&&b| b).count();
            Ok(vec![2 * pos > y.len(); x.n_rows()])
        }
    }

    #[test]
    fn majority_learner() {
        let y = labels(90, 10);
        let x = Matrix::new(100, 1, vec![0.0; 100]).unwrap();
        let r = cross_validate_with(&Majority, &x, &y, &CvConfig { repeats: 2, ..Default::default() }).unwrap();
        assert!((r.accuracy.mean - 0.9).abs() < 1e-12);
        assert_eq!(r.precision.mean, 0.0);
        assert_eq!(r.folds.len(), 10);
    }
}
