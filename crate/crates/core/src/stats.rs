//! Descriptive statistics shared by the feature extractor and reports.
//!
//! Conventions are fixed so golden vectors stay reproducible: population
//! standard deviation, inclusive linear-interpolation quantiles, and all
//! statistics equal to zero for an empty population.

use serde::{Deserialize, Serialize};

/// Mean, standard deviation, third quartile and maximum of a population.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary4 {
    pub mean: f64,
    pub std: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary4 {
    pub fn to_array(self) -> [f64; 4] {
        [self.mean, self.std, self.q3, self.max]
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation; zero for one or fewer values.
pub fn population_std(values: &[f64]) -> f64 {
    if values.len() <= 1 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.max(0.0).sqrt()
}

/// Quantile of already sorted values by inclusive linear interpolation
/// (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summary4(values: &[f64]) -> Summary4 {
    if values.is_empty() {
        return Summary4::default();
    }
    let sorted = sorted_copy(values);
    Summary4 {
        mean: mean(values),
        std: population_std(values),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_population_is_all_zero() {
        assert_eq!(summary4(&[]), Summary4::default());
    }

    #[test]
    fn single_value() {
        let s = summary4(&[3.5]);
        assert_eq!(s, Summary4 { mean: 3.5, std: 0.0, q3: 3.5, max: 3.5 });
    }

    #[test]
    fn quartile_interpolates() {
        // positions: 0.75 * 4 = 3 -> exact element
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.75), 4.0);
        // 0.75 * 3 = 2.25 -> 3 + 0.25 * (4 - 3)
        assert!((quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.75) - 3.25).abs() < 1e-12);
    }
}
