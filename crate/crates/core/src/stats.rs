//! Small statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};

/// A value with an optional standard error. `se = None` means "not
/// estimable", which is different from a zero error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertain {
    pub value: f64,
    pub se: Option<f64>,
}

impl Uncertain {
    pub fn exact(value: f64) -> Self {
        Self { value, se: None }
    }

    pub fn new(value: f64, se: Option<f64>) -> Self {
        Self { value, se }
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            se: self.se.map(|s| s * k.abs()),
        }
    }
}

/// Arithmetic mean computed as an offset from the first element, so a
/// constant input returns that constant exactly.
pub fn mean(xs: &[f64]) -> Option<f64> {
    let (&first, rest) = xs.split_first()?;
    let offset: f64 = rest.iter().map(|x| x - first).sum();
    Some(first + offset / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator). `None` below two values.
pub fn sample_std_dev(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Standard error of the mean: sample std dev over sqrt(n).
pub fn standard_error(xs: &[f64]) -> Option<f64> {
    sample_std_dev(xs).map(|sd| sd / (xs.len() as f64).sqrt())
}

/// Nearest-rank percentile over an ascending slice. `percent` is an integer
/// in 0..=100; the rank is `ceil(percent * n / 100)` clamped to `1..=n`.
pub fn nearest_rank(sorted: &[f64], percent: u32) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = (percent as usize * n).div_ceil(100).clamp(1, n);
    Some(sorted[rank - 1])
}

/// Linear (worst-case) sum of errors. `None` if no term carries an error.
pub fn linear_sum<I: IntoIterator<Item = Option<f64>>>(errs: I) -> Option<f64> {
    errs.into_iter().flatten().fold(None, |acc, e| Some(acc.unwrap_or(0.0) + e))
}

/// Root-sum-square of errors. `None` if no term carries an error.
pub fn quadrature_sum<I: IntoIterator<Item = Option<f64>>>(errs: I) -> Option<f64> {
    errs.into_iter()
        .flatten()
        .fold(None, |acc: Option<f64>, e| Some(acc.unwrap_or(0.0) + e * e))
        .map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_constant_is_exact() {
        let xs = vec![0.1; 12];
        assert_eq!(mean(&xs), Some(0.1));
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn two_sample_standard_error_is_half_the_spread() {
        let se = standard_error(&[3.0, 7.0]).unwrap();
        assert!((se - 2.0).abs() < 1e-12);
        assert_eq!(standard_error(&[3.0]), None);
    }

    #[test]
    fn nearest_rank_on_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 16), Some(16.0));
        assert_eq!(nearest_rank(&xs, 84), Some(84.0));
        assert_eq!(nearest_rank(&xs, 0), Some(1.0));
        assert_eq!(nearest_rank(&xs, 100), Some(100.0));
        assert_eq!(nearest_rank(&[5.0], 16), Some(5.0));
    }

    #[test]
    fn error_sums_skip_absent_terms() {
        assert_eq!(linear_sum([None, None]), None);
        assert_eq!(quadrature_sum([None]), None);
        assert_eq!(linear_sum([Some(3.0), None, Some(4.0)]), Some(7.0));
        assert_eq!(quadrature_sum([Some(3.0), None, Some(4.0)]), Some(5.0));
    }
}
