//! Numeric stationary distribution of the relay queue by truncation.

use serde::{Deserialize, Serialize};

use super::TransitionKernel;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest number of states explored before giving up.
pub const MAX_STATES: usize = 20_000_000;
/// Target bound on the neglected tail mass relative to the total.
const TAIL_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    /// Estimated mass beyond the last state (before normalization).
    pub tail_estimate: f64,
}

impl StationaryDistribution {
    pub fn p_empty(&self) -> f64 {
        self.probs[0]
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| i as f64 * p)
            .sum::<CompensatedSum>()
            .value()
    }
}

/// Solve the balance equations across the cuts `{0..=i} | {i+1..}`.
///
/// Probability only leaves the upper set one state at a time, so each cut
/// equation gives the next unnormalized probability from the previous ones
/// using only non-negative terms.
pub fn stationary_numeric(kernel: &TransitionKernel) -> Result<StationaryDistribution> {
    stationary_numeric_with_limit(kernel, MAX_STATES)
}

pub fn stationary_numeric_with_limit(kernel: &TransitionKernel, max_states: usize) -> Result<StationaryDistribution> {
    if !kernel.is_stable() {
        return Err(Error::Unstable {
            drift: kernel.drift(),
        });
    }
    let n = kernel.n as usize;
    // Tail sums: up0[j] = P(jump > j | empty), up1[j] = P(jump > j | non-empty).
    let tail = |row: &[f64], offset: usize| -> Vec<f64> {
        (0..=n)
            .map(|j| {
                row.iter()
                    .enumerate()
                    .filter(|&(i, _)| i >= offset && i - offset > j)
                    .map(|(_, &p)| p)
                    .sum::<CompensatedSum>()
                    .value()
            })
            .collect()
    };
    let up0 = tail(&kernel.p0, 0);
    let up1 = tail(&kernel.p1, 1);
    let down = kernel.p_down();

    let mut probs = vec![1.0];
    let mut total = CompensatedSum::new();
    total.add(1.0);
    let mut calm_steps = 0usize;
    while probs.len() < max_states {
        let i = probs.len() - 1;
        let mut flow = CompensatedSum::new();
        if i < up0.len() {
            flow.add(probs[0] * up0[i]);
        }
        let lo = if i >= n { i - n + 1 } else { 1 }.max(1);
        for (j, &pj) in probs.iter().enumerate().take(i + 1).skip(lo) {
            let gap = i - j;
            if gap <= n {
                flow.add(pj * up1[gap]);
            }
        }
        let next = if flow.value() == 0.0 { 0.0 } else { flow.value() / down };
        probs.push(next);
        total.add(next);
        if next == 0.0 {
            break;
        }
        let prev = probs[i];
        let ratio = if prev > 0.0 { next / prev } else { 1.0 };
        let tail_bound = if ratio < 1.0 {
            next * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if i > n && tail_bound < TAIL_TOLERANCE * total.value() {
            calm_steps += 1;
            if calm_steps > n + 1 {
                break;
            }
        } else {
            calm_steps = 0;
        }
    }
    if probs.len() >= max_states {
        return Err(Error::NotConverged(max_states));
    }
    let last = *probs.last().unwrap();
    let prev = probs[probs.len() - 2];
    let tail_estimate = if prev > 0.0 && last < prev {
        let r = last / prev;
        last * r / (1.0 - r)
    } else {
        0.0
    };
    let z = total.value();
    for p in probs.iter_mut() {
        *p /= z;
    }
    while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
        probs.pop();
    }
    Ok(StationaryDistribution {
        probs,
        tail_estimate: tail_estimate / z,
    })
}
