//! Small numeric helpers shared across modules.

use std::collections::{BTreeMap, BTreeSet};

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Log of the multinomial coefficient `(Σ parts)! / Π parts!`.
pub fn ln_multinomial(parts: &[u64]) -> f64 {
    let total: u64 = parts.iter().sum();
    parts
        .iter()
        .fold(ln_factorial(total), |acc, &p| acc - ln_factorial(p))
}

/// `c * ln(w)` with the convention `0 * ln 0 = 0`.
pub fn count_log(count: u64, w: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * w.ln()
    }
}

/// `ln(e^x + e^y)`, exact when either side is `-inf`.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Compensated (Neumaier) summation. A single `-inf` term pins the total.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
    neg_inf: bool,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            self.neg_inf = true;
            return;
        }
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn is_neg_inf(&self) -> bool {
        self.neg_inf
    }

    pub fn value(&self) -> f64 {
        if self.neg_inf {
            f64::NEG_INFINITY
        } else {
            self.sum + self.comp
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Linear-interpolated quantile of already sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Total-variation comparison of two laws on a discrete space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvReport {
    pub tv: f64,
    /// Mass (max over the two laws) falling on points dropped by the cutoff.
    pub truncated_mass: f64,
}

/// Empirical law built from integer counts.
#[derive(Clone, Debug, Default)]
pub struct EmpiricalLaw<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord + Clone> EmpiricalLaw<K> {
    pub fn new() -> Self {
        Self {
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn push(&mut self, key: K) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (k, c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn prob(&self, key: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn to_probs(&self) -> BTreeMap<K, f64> {
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.total as f64))
            .collect()
    }
}

/// Total variation `½ Σ |p - q|` over points where either law carries more
/// than `cutoff` mass. Points below the cutoff on both sides are dropped and
/// their mass reported.
pub fn tv_truncated<K: Ord + Clone>(
    p: &BTreeMap<K, f64>,
    q: &BTreeMap<K, f64>,
    cutoff: f64,
) -> TvReport {
    let keys: BTreeSet<&K> = p.keys().chain(q.keys()).collect();
    let mut tv = 0.0;
    let mut dropped_p = 0.0;
    let mut dropped_q = 0.0;
    for k in keys {
        let pk = p.get(k).copied().unwrap_or(0.0);
        let qk = q.get(k).copied().unwrap_or(0.0);
        if pk > cutoff || qk > cutoff {
            tv += (pk - qk).abs();
        } else {
            dropped_p += pk;
            dropped_q += qk;
        }
    }
    TvReport {
        tv: 0.5 * tv,
        truncated_mass: dropped_p.max(dropped_q),
    }
}

/// Format with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{:.11e}", x)
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
