//! Brute-force reference implementations, kept free of library code.

use crosspkg::models::Criterion;

fn impurity(c: Criterion, n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let h = |q: f64, base: f64| if q == 0.0 { 0.0 } else { -q * q.ln() / base.ln() };
    match c {
        Criterion::Gini => 2.0 * p * (1.0 - p),
        Criterion::Entropy => h(p, 2.0) + h(1.0 - p, 2.0),
        Criterion::LogLoss => h(p, std::f64::consts::E) + h(1.0 - p, std::f64::consts::E),
    }
}

/// Best root split by exhaustive enumeration of (feature, midpoint) pairs,
/// first in (feature, threshold) order among near-ties. `None` when the root
/// is pure or no feature varies.
pub fn best_root_split(rows: &[Vec<f64>], y: &[bool], c: Criterion) -> Option<(usize, f64)> {
    let n = y.len();
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == n || n < 2 {
        return None;
    }
    let d = rows[0].len();
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for f in 0..d {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut nl, mut pl) = (0, 0);
            for (r, &lab) in rows.iter().zip(y) {
                if r[f] <= t {
                    nl += 1;
                    pl += usize::from(lab);
                }
            }
            let (nr, pr) = (n - nl, pos - pl);
            let score = -(nl as f64 * impurity(c, nl, pl) + nr as f64 * impurity(c, nr, pr));
            cands.push((f, t, score));
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    cands.into_iter().find(|c| c.2 >= best - 1e-9).map(|c| (c.0, c.1))
}

/// (precision, recall, f1, accuracy) by counting every cell.
pub fn confusion_metrics(y_true: &[bool], y_pred: &[bool]) -> (f64, f64, f64, f64) {
    let mut cell = [[0usize; 2]; 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cell[usize::from(t)][usize::from(p)] += 1;
    }
    let (tn, fp, fn_, tp) = (cell[0][0] as f64, cell[0][1] as f64, cell[1][0] as f64, cell[1][1] as f64);
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let accuracy = if y_true.is_empty() { 0.0 } else { (tp + tn) / y_true.len() as f64 };
    (precision, recall, f1, accuracy)
}

/// Entropy in bits of the four-class generalization of `s`.
pub fn gl4_entropy(s: &str) -> f64 {
    let mut counts = [0f64; 4];
    for ch in s.chars() {
        let k = match ch {
            'a'..='z' => 0,
            'A'..='Z' => 1,
            '0'..='9' => 2,
            _ => 3,
        };
        counts[k] += 1.0;
    }
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    counts.iter().filter(|&&c| c > 0.0).map(|&c| c / n * (n / c).log2()).sum()
}

/// (mean, population std, Q3 by linear interpolation at 0.75·(n-1), max); zeros when empty.
pub fn summary(v: &[f64]) -> [f64; 4] {
    if v.is_empty() {
        return [0.0; 4];
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = 0.75 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let q3 = if lo + 1 < s.len() { s[lo] * (1.0 - frac) + s[lo + 1] * frac } else { s[lo] };
    [mean, std, q3, *s.last().unwrap()]
}
