//! Summation of dyadic shell contributions with a geometric tail estimate.

use super::sum::neumaier;
use serde::{Deserialize, Serialize};

/// Partial sum over `k ∈ [k_min, k_max]` and its extrapolated tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    /// `Σ_{k=k_min}^{k_max} term(k)`.
    pub partial: f64,
    /// Geometric estimate of `Σ_{k>k_max} term(k)`.
    pub tail: f64,
    /// Ratio `term(k_max)/term(k_max−1)` used for the tail.
    pub ratio: f64,
    /// False when the last terms do not decay (`|ratio| ≥ 1`).
    pub converged: bool,
}

impl DyadicReport {
    /// Partial sum plus tail.
    pub fn value(&self) -> f64 {
        self.partial + self.tail
    }
}

/// Sums precomputed shell terms; `terms[i]` belongs to `k_min + i`.
pub fn dyadic_sum_terms(terms: &[f64]) -> DyadicReport {
    let partial = neumaier(terms.iter().copied());
    let n = terms.len();
    if n < 2 {
        return DyadicReport { partial, tail: 0.0, ratio: 0.0, converged: true };
    }
    let (prev, last) = (terms[n - 2], terms[n - 1]);
    if last == 0.0 {
        return DyadicReport { partial, tail: 0.0, ratio: 0.0, converged: true };
    }
    if prev == 0.0 {
        return DyadicReport { partial, tail: 0.0, ratio: f64::INFINITY, converged: false };
    }
    let ratio = last / prev;
    if ratio.abs() >= 1.0 {
        return DyadicReport { partial, tail: 0.0, ratio, converged: false };
    }
    DyadicReport { partial, tail: last * ratio / (1.0 - ratio), ratio, converged: true }
}

/// `Σ_{k=k_min}^{k_max} term(k)` with a geometric tail estimate.
pub fn dyadic_sum(term: impl Fn(i32) -> f64, k_min: i32, k_max: i32) -> DyadicReport {
    assert!(k_min <= k_max, "empty dyadic range");
    let terms: Vec<f64> = (k_min..=k_max).map(term).collect();
    dyadic_sum_terms(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        let r = dyadic_sum(|k| 2f64.powi(-k), 0, 20);
        assert!((r.partial - (2.0 - 2f64.powi(-20))).abs() < 1e-15);
        assert!((r.tail - 2f64.powi(-20)).abs() < 1e-18);
        assert!(r.converged);
        assert!((r.value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_slow_series() {
        let r = dyadic_sum(|_| 0.0, -3, 3);
        assert_eq!(r.value(), 0.0);
        let r = dyadic_sum(|k| 2f64.powf(-1.5 * k as f64), 0, 10);
        assert!((r.ratio - 2f64.powf(-1.5)).abs() < 1e-14);
        let r = dyadic_sum(|k| k as f64, 1, 5);
        assert!(!r.converged);
    }
}
