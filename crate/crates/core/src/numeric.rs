//! Small numeric helpers shared by the analytical sums.

use std::iter::Sum;
use std::ops::AddAssign;

/// Neumaier-compensated accumulator.
///
/// The arrival and service sums mix binomial weights spanning many orders of
/// magnitude; plain accumulation loses the low-order terms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Sum<f64> for CompensatedSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        iter.for_each(|x| acc.add(x));
        acc
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().sum::<CompensatedSum>().value()
}

/// Binomial coefficient as `f64`. Exact for the sizes used here (n < 60).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc.round()
}

/// Probability mass function of Binomial(n, p) on `0..=n`.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    (0..=n)
        .map(|k| binomial(n, k) * p.powi(k as i32) * q.powi((n - k) as i32))
        .collect()
}

/// Discrete convolution of two PMFs.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut naive = 0.0;
        let mut acc = CompensatedSum::new();
        for x in [1e16, 1.0, -1e16, 1.0] {
            naive += x;
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.0);
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(20, 10), 184_756.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(0, 0), 1.0);
    }

    #[test]
    fn binomial_pmf_sums_to_one_and_handles_edges() {
        let pmf = binomial_pmf(7, 0.3);
        assert!((csum(pmf.iter().copied()) - 1.0).abs() < 1e-15);
        assert_eq!(binomial_pmf(3, 0.0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(binomial_pmf(3, 1.0), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(binomial_pmf(0, 0.5), vec![1.0]);
    }

    #[test]
    fn convolution_of_bernoullis() {
        let c = convolve(&[0.5, 0.5], &[0.25, 0.75]);
        assert_eq!(c, vec![0.125, 0.5, 0.375]);
    }
}
