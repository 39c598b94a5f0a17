mod common;

use common::oracles::confusion_metrics;
use crosspkg::models::{GbtParams, Hyperparams, Matrix, ModelKind};
use crosspkg::tuning::{
    compute_metrics, cross_validate, optimize_cv, optimize_hyperparams, stratified_folds, CvConfig, ParamRange,
    ParamSpec, SearchSpace,
    Strategy as Search, TrialScore,
};
use proptest::prelude::*;

fn labels() -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), 20..200)
}

proptest! {
    #[test]
    fn folds_partition_and_stratify(y in labels(), k in 2usize..=5, seed in any::<u64>()) {
        let pos = y.iter().filter(|&&b| b).count();
        let neg = y.len() - pos;
        prop_assume!(pos >= k && neg >= k);
        let folds = stratified_folds(&y, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0u8; y.len()];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
            let fp = f.iter().filter(|&&i| y[i]).count() as f64;
            let fneg = f.len() as f64 - fp;
            prop_assert!((fp - pos as f64 / k as f64).abs() <= 1.0);
            prop_assert!((fneg - neg as f64 / k as f64).abs() <= 1.0);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn metrics_match_confusion_oracle(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..300)) {
        let (t, p): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let m = compute_metrics(&t, &p).unwrap();
        let (pr, rc, f1, acc) = confusion_metrics(&t, &p);
        prop_assert!((m.precision - pr).abs() < 1e-12);
        prop_assert!((m.recall - rc).abs() < 1e-12);
        prop_assert!((m.f1 - f1).abs() < 1e-12);
        prop_assert!((m.accuracy - acc).abs() < 1e-12);
        for v in [m.precision, m.recall, m.f1, m.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

/// Smooth synthetic objective peaking at a fixed point of the unit box.
fn bowl(space: &SearchSpace, hp: &Hyperparams) -> f64 {
    let u = space.encode(hp).unwrap();
    let peak = [0.8, 0.3, 0.6, 0.2, 0.7, 0.4];
    1.0 - u.iter().zip(peak).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / u.len() as f64
}

#[test]
fn best_is_the_max_of_the_log_and_inside_the_space() {
    for kind in [ModelKind::Dt, ModelKind::Rf, ModelKind::Gbt] {
        let space = SearchSpace::default_for(kind);
        for strategy in [Search::Random, Search::Smbo] {
            let out = optimize_hyperparams(&space, 24, strategy, 5, |hp| {
                let p = (bowl(&space, hp) * 20.0).round() / 20.0;
                Ok(TrialScore { precision: p, recall: 1.0 - p, report: None })
            })
            .unwrap();
            assert_eq!(out.trials.len(), 24);
            let best = out.trials.iter().map(|t| t.mean_precision).fold(f64::NEG_INFINITY, f64::max);
            let winner = &out.trials[out.best_index];
            assert_eq!(winner.mean_precision, best);
            let first = out
                .trials
                .iter()
                .filter(|t| t.mean_precision == best)
                .max_by(|a, b| a.mean_recall.total_cmp(&b.mean_recall).then(b.trial_index.cmp(&a.trial_index)))
                .unwrap();
            assert_eq!(first.trial_index, out.best_index);
            assert_eq!(out.best_hp, winner.hp);
            assert!(out.trials.iter().all(|t| space.contains(&t.hp)));
        }
    }
}

/// One dimension with a narrow high region around 0.73 and a gentle slope toward it elsewhere.
fn spike(space: &SearchSpace, hp: &Hyperparams) -> f64 {
    let u = space.encode(hp).unwrap()[0];
    0.6 - 0.2 * (u - 0.73).abs() + 0.4 * (-((u - 0.73) / 0.03).powi(2)).exp()
}

#[test]
fn smbo_keeps_up_with_random_search() {
    let space = SearchSpace {
        kind: ModelKind::Gbt,
        params: vec![ParamSpec { name: "learning_rate".into(), range: ParamRange::Float { lo: 0.01, hi: 0.5, log: false } }],
    };
    let run = |strategy, seed| {
        let out = optimize_hyperparams(&space, 20, strategy, seed, |hp| {
            Ok(TrialScore { precision: spike(&space, hp), recall: 0.0, report: None })
        })
        .unwrap();
        out.trials[out.best_index].mean_precision
    };
    let losses = (0..10).filter(|&s| run(Search::Smbo, s) < run(Search::Random, s)).count();
    assert!(losses <= 3, "smbo behind on {losses} of 10 seeds");
}

fn toy_data() -> (Matrix, Vec<bool>) {
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i * 37 % 61) as f64, (i % 7) as f64]).collect();
    let y: Vec<bool> = rows.iter().map(|r| r[0] > 45.0 || r[1] == 3.0).collect();
    (Matrix::from_rows(&rows, 2).unwrap(), y)
}

#[test]
fn harness_is_bit_reproducible() {
    let (x, y) = toy_data();
    let hp = Hyperparams::Gbt(GbtParams { n_estimators: 15, colsample_bytree: 0.5, ..GbtParams::default() });
    let cv = CvConfig { k: 3, repeats: 4, seed: 9 };
    let a = cross_validate(&x, &y, &hp, &cv).unwrap();
    let b = cross_validate(&x, &y, &hp, &cv).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.folds.len(), 12);
    assert_eq!(a.precision.mean.to_bits(), b.precision.mean.to_bits());

    let mut space = SearchSpace::default_for(ModelKind::Gbt);
    space.params.retain(|p| p.name != "n_estimators");
    let cv = CvConfig { k: 3, repeats: 1, seed: 2 };
    let o1 = optimize_cv(&x, &y, &space, 8, Search::Smbo, &cv, 4).unwrap();
    let o2 = optimize_cv(&x, &y, &space, 8, Search::Smbo, &cv, 4).unwrap();
    assert_eq!(o1, o2);
}

#[test]
fn never_flagging_has_zero_precision() {
    let m = compute_metrics(&[true, false, true], &[false, false, false]).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
}

