use serde::{Deserialize, Serialize};

use super::TuningError;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(y_true: &[bool], y_pred: &[bool]) -> Result<Self, TuningError> {
        if y_true.len() != y_pred.len() {
            return Err(TuningError::LengthMismatch(y_true.len(), y_pred.len()));
        }
        let mut c = Confusion::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics { precision, recall, f1, accuracy: ratio(self.tp + self.tn, self.total()) }
    }
}

/// Positive-class metrics; zero when a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn compute_metrics(y_true: &[bool], y_pred: &[bool]) -> Result<Metrics, TuningError> {
    Ok(Confusion::from_labels(y_true, y_pred)?.metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        MeanStd { mean: stats::mean(values), std: stats::population_std(values) }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}±{:.1}", 100.0 * self.mean, 100.0 * self.std)
    }
}

/// Mean and population std over every fold of every repeat.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub accuracy: MeanStd,
    /// Per-evaluation metrics, repeat-major then fold order.
    pub folds: Vec<Metrics>,
}

impl MetricsReport {
    pub fn from_folds(folds: Vec<Metrics>) -> Self {
        let col = |f: fn(&Metrics) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
        MetricsReport {
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            accuracy: col(|m| m.accuracy),
            folds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let c = Confusion { tp: 3, fp: 1, fn_: 1, tn: 95 };
        let m = c.metrics();
        assert_eq!((m.precision, m.recall, m.f1), (0.75, 0.75, 0.75));
        assert_eq!(m.accuracy, 0.98);
    }

    #[test]
    fn zero_division() {
        let y: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let m = compute_metrics(&y, &[false; 20]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(compute_metrics(&y, &y).unwrap(), Metrics { precision: 1.0, recall: 1.0, f1: 1.0, accuracy: 1.0 });
        assert!(compute_metrics(&y, &[true]).is_err());
    }
}
