//! Four-symbol generalization (`L`, `U`, `D`, `S`) and Shannon entropy of
//! the generalized pattern.

use crate::stats::{summary4, Summary4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Gl4Class {
    Lower = 0,
    Upper = 1,
    Digit = 2,
    Symbol = 3,
}

impl Gl4Class {
    /// ASCII classes; anything non-ASCII is a symbol.
    pub fn of(c: char) -> Self {
        if c.is_ascii_lowercase() {
            Gl4Class::Lower
        } else if c.is_ascii_uppercase() {
            Gl4Class::Upper
        } else if c.is_ascii_digit() {
            Gl4Class::Digit
        } else {
            Gl4Class::Symbol
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Gl4Class::Lower => 'L',
            Gl4Class::Upper => 'U',
            Gl4Class::Digit => 'D',
            Gl4Class::Symbol => 'S',
        }
    }
}

pub fn gl4_encode(s: &str) -> String {
    s.chars().map(|c| Gl4Class::of(c).symbol()).collect()
}

/// Per-class counts of the GL4 encoding of `s`, without materializing it.
pub fn gl4_counts(s: &str) -> [usize; 4] {
    let mut counts = [0usize; 4];
    for c in s.chars() {
        counts[Gl4Class::of(c) as usize] += 1;
    }
    counts
}

fn entropy_of_counts(counts: impl IntoIterator<Item = usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // a single-symbol distribution sums to -0.0
    h.max(0.0)
}

/// Shannon entropy in bits of the character distribution of `pattern`.
pub fn shannon_entropy(pattern: &str) -> f64 {
    let mut ascii = [0usize; 128];
    let mut other: std::collections::BTreeMap<char, usize> = Default::default();
    let mut total = 0;
    for c in pattern.chars() {
        total += 1;
        if c.is_ascii() {
            ascii[c as usize] += 1;
        } else {
            *other.entry(c).or_default() += 1;
        }
    }
    entropy_of_counts(ascii.into_iter().chain(other.into_values()), total)
}

/// Entropy of the GL4 pattern of `s`; equals `shannon_entropy(&gl4_encode(s))`.
pub fn gl4_entropy(s: &str) -> f64 {
    let counts = gl4_counts(s);
    entropy_of_counts(counts, counts.iter().sum())
}

/// Mean, population std, inclusive-interpolated Q3 and max of the GL4
/// entropies of `items`. All zero for an empty list.
pub fn entropy_stats<S: AsRef<str>>(items: &[S]) -> Summary4 {
    let entropies: Vec<f64> = items.iter().map(|s| gl4_entropy(s.as_ref())).collect();
    summary4(&entropies)
}

/// A string is homogeneous when its GL4 encoding uses at most one distinct
/// symbol (so the empty string counts as homogeneous).
pub fn is_homogeneous(s: &str) -> bool {
    gl4_counts(s).iter().filter(|&&c| c > 0).count() <= 1
}

/// `(homogeneous, heterogeneous)`.
pub fn homogeneity_counts<S: AsRef<str>>(items: &[S]) -> (usize, usize) {
    let homogeneous = items.iter().filter(|s| is_homogeneous(s.as_ref())).count();
    (homogeneous, items.len() - homogeneous)
}
