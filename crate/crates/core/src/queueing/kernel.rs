//! Batch-arrival transition kernel of the relay queue and its closed-form
//! stationary moments.

use serde::{Deserialize, Serialize};

use super::{actual_tx_prob, RelayLaw};
use crate::channel::SuccessTable;
use crate::config::StrategyMix;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Closure values this close to zero are rounding noise and clamp to 0.
const CLOSURE_TOLERANCE: f64 = 1e-12;

/// Transition probabilities of the relay queue length between slots.
///
/// From an empty queue the length grows by `k` with probability `p0[k]`;
/// from a non-empty queue it changes by `k` with probability `p1[k + 1]`,
/// `k = -1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub n: u32,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl TransitionKernel {
    /// `p_k^1` for `k >= -1`.
    pub fn p1_at(&self, k: i64) -> f64 {
        usize::try_from(k + 1)
            .ok()
            .and_then(|i| self.p1.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn p_down(&self) -> f64 {
        self.p1[0]
    }

    /// Mean arrivals from the empty state.
    pub fn lambda0(&self) -> f64 {
        self.p0
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum::<CompensatedSum>()
            .value()
    }

    /// Mean change of the queue length from a non-empty state.
    pub fn drift(&self) -> f64 {
        self.p1
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as f64 - 1.0) * p)
            .sum::<CompensatedSum>()
            .value()
    }

    pub fn is_stable(&self) -> bool {
        self.lambda0() == 0.0 || self.drift() < 0.0
    }

    /// Check row sums and entry ranges.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        for (name, row) in [("p0", &self.p0), ("p1", &self.p1)] {
            if let Some(p) = row.iter().find(|p| !(-tol..=1.0 + tol).contains(*p)) {
                return Err(format!("{name} has entry {p} outside [0, 1]"));
            }
            let s = row.iter().copied().sum::<CompensatedSum>().value();
            if (s - 1.0).abs() > tol {
                return Err(format!("{name} sums to {s}"));
            }
        }
        Ok(())
    }
}

pub(super) fn from_law(law: &RelayLaw) -> Result<TransitionKernel> {
    let q_r = law.q_r;
    let n = law.n as usize;
    let p0 = law.arrivals_silent.clone();
    let mut p1 = vec![0.0; n + 2];
    p1[0] = q_r * law.deliver_and_idle;
    for k in 1..=n {
        p1[k + 1] = (1.0 - q_r) * law.arrivals_silent[k] + q_r * law.net_growth[k];
    }
    let rest = p1[0] + p1[2..].iter().copied().sum::<CompensatedSum>().value();
    let closure = 1.0 - rest;
    if closure < -CLOSURE_TOLERANCE {
        return Err(Error::NegativeClosure(closure));
    }
    p1[1] = closure.max(0.0);
    Ok(TransitionKernel {
        n: law.n,
        p0,
        p1,
    })
}

/// Transition kernel of the relay queue for `n` UEs.
pub fn transition_kernel(table: &SuccessTable, mix: &StrategyMix, n: u32) -> Result<TransitionKernel> {
    from_law(&RelayLaw::compute(table, mix, n, actual_tx_prob(mix))?)
}

/// Stationary probability that the relay queue is empty.
pub fn prob_empty(kernel: &TransitionKernel, lambda0: f64) -> Result<f64> {
    if lambda0 == 0.0 {
        return Ok(1.0);
    }
    let d = kernel.drift();
    if d >= 0.0 {
        return Err(Error::Unstable { drift: d });
    }
    Ok(-d / (lambda0 - d))
}

/// Stationary mean queue length.
pub fn avg_queue_size(kernel: &TransitionKernel, lambda0: f64) -> Result<f64> {
    if lambda0 == 0.0 {
        return Ok(0.0);
    }
    let d = kernel.drift();
    if d >= 0.0 {
        return Err(Error::Unstable { drift: d });
    }
    let second = |row: &[f64], offset: f64| {
        row.iter()
            .enumerate()
            .map(|(i, &p)| {
                let k = i as f64 - offset;
                k * (k + 1.0) * p
            })
            .sum::<CompensatedSum>()
            .value()
    };
    let s0 = second(&kernel.p0, 0.0);
    let s1 = second(&kernel.p1, 1.0);
    Ok((d * s0 - lambda0 * s1) / (2.0 * d * (lambda0 - d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single arrival stream with Bernoulli(a) arrivals and Bernoulli(s)
    /// service: the classical discrete-time Geo/Geo/1 queue.
    fn geo_geo(a: f64, s: f64) -> TransitionKernel {
        TransitionKernel {
            n: 1,
            p0: vec![1.0 - a, a],
            p1: vec![s * (1.0 - a), s * a + (1.0 - s) * (1.0 - a), (1.0 - s) * a],
        }
    }

    #[test]
    fn geo_geo_closed_forms() {
        let (a, s) = (0.3, 0.6);
        let k = geo_geo(a, s);
        k.check(1e-15).unwrap();
        // Empty probability of the boundary-observed Geo/Geo/1 queue.
        let p0 = 1.0 - a / s;
        assert!((prob_empty(&k, a).unwrap() - p0).abs() < 1e-14);
        let stationary = super::super::stationary_numeric(&k).unwrap();
        assert!((avg_queue_size(&k, a).unwrap() - stationary.mean()).abs() < 1e-10);
    }

    #[test]
    fn unstable_kernel_is_an_error() {
        let k = geo_geo(0.6, 0.5);
        assert!(matches!(prob_empty(&k, 0.6), Err(Error::Unstable { .. })));
        assert!(avg_queue_size(&k, 0.6).is_err());
    }

    #[test]
    fn empty_arrivals_degenerate() {
        let k = geo_geo(0.0, 0.5);
        assert_eq!(prob_empty(&k, 0.0).unwrap(), 1.0);
        assert_eq!(avg_queue_size(&k, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_limit_drives_empty_probability_to_zero() {
        let mut prev = 1.0;
        for s in [0.9, 0.6, 0.45, 0.41, 0.401, 0.4001] {
            let p = prob_empty(&geo_geo(0.4, s), 0.4).unwrap();
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 1e-3);
    }
}
