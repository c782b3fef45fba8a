//! Transmit probability under beam alignment, relay arrival and service
//! rates, stability, and the relay-queue Markov chain.

mod kernel;
mod stationary;

use serde::{Deserialize, Serialize};

use crate::channel::{Link, Scheme, SuccessTable};
use crate::config::StrategyMix;
use crate::error::{Error, Result};
use crate::numeric::{binomial_pmf, convolve, CompensatedSum};

pub use kernel::{avg_queue_size, prob_empty, transition_kernel, TransitionKernel};
pub use stationary::{stationary_numeric, StationaryDistribution};

/// Probability that two consecutive attempts use the same strategy.
pub fn repeat_probability(mix: &StrategyMix) -> f64 {
    let fm = mix.q_fm();
    let fr = mix.q_fr();
    let b = mix.q_b();
    fm * fm + fr * fr + b * b
}

/// Per-slot transmit probability of a UE that must re-align whenever its
/// strategy changes.
pub fn actual_tx_prob(mix: &StrategyMix) -> f64 {
    mix.q_u / (1.0 + mix.d_a * mix.q_u * (1.0 - repeat_probability(mix)))
}

/// Transmit probability when the alignment duration depends on the new
/// strategy (`d_a_f` for the directional ones, `d_a_b` for broadcast).
pub fn actual_tx_prob_variable(mix: &StrategyMix, d_a_f: f64, d_a_b: f64) -> f64 {
    let overhead = [(mix.q_fm(), d_a_f), (mix.q_fr(), d_a_f), (mix.q_b(), d_a_b)]
        .iter()
        .map(|&(q, d)| q * (1.0 - q) * d)
        .sum::<f64>();
    mix.q_u / (1.0 + mix.q_u * overhead)
}

/// Numbers of concurrent transmitters per strategy in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Crowd {
    pub fm: u32,
    pub fr: u32,
    pub b: u32,
}

/// Visit every (fm, fr, b) split of `n` UEs transmitting independently with
/// probability `q_tx`, together with its probability.
pub(crate) fn for_each_crowd(n: u32, q_tx: f64, mix: &StrategyMix, mut f: impl FnMut(f64, Crowd)) {
    let w_m = binomial_pmf(n, q_tx);
    for (m, &wm) in w_m.iter().enumerate() {
        if wm == 0.0 {
            continue;
        }
        let w_i = binomial_pmf(m as u32, mix.q_uf);
        for (i, &wi) in w_i.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let w_j = binomial_pmf(i as u32, mix.q_ur);
            for (j, &wj) in w_j.iter().enumerate() {
                let w = wm * wi * wj;
                if w == 0.0 {
                    continue;
                }
                f(
                    w,
                    Crowd {
                        fm: (i - j) as u32,
                        fr: j as u32,
                        b: (m - i) as u32,
                    },
                );
            }
        }
    }
}

/// Per-packet admission probabilities at the relay for one crowd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Admission {
    /// Directional packet towards the relay decoded.
    pub fr: f64,
    /// Broadcast packet missed by the access point and decoded by the relay.
    pub b: f64,
}

pub(crate) fn admission(table: &SuccessTable, c: Crowd, relay_active: bool) -> Result<Admission> {
    let fr = if c.fr > 0 {
        table.prob(Link::UeToRelay, Scheme::Fd, c.fr - 1, c.b, relay_active)?
    } else {
        0.0
    };
    let b = if c.b > 0 {
        let at_relay = table.prob(Link::UeToRelay, Scheme::Br, c.fr, c.b - 1, relay_active)?;
        let at_ap = table.prob(Link::UeToAp, Scheme::Br, c.fm, c.b - 1, relay_active)?;
        at_relay * (1.0 - at_ap)
    } else {
        0.0
    };
    Ok(Admission { fr, b })
}

/// Law of the number of relay admissions in one slot for a given crowd.
pub(crate) fn admission_pmf(c: Crowd, a: Admission) -> Vec<f64> {
    convolve(&binomial_pmf(c.fr, a.fr), &binomial_pmf(c.b, a.b))
}

/// Relay-to-access-point decoding probability for a crowd.
pub(crate) fn relay_delivery(table: &SuccessTable, c: Crowd) -> Result<f64> {
    table.prob(Link::RelayToAp, Scheme::Fd, c.fm, c.b, false)
}

/// Everything the queue analysis needs from one pass over all crowds.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayLaw {
    pub n: u32,
    pub q_tx: f64,
    pub q_r: f64,
    /// Arrival law with the relay silent, `k = 0..=n`.
    pub arrivals_silent: Vec<f64>,
    /// Arrival law with the relay transmitting, `k = 0..=n`.
    pub arrivals_active: Vec<f64>,
    /// Mean relay decoding probability.
    pub b_r: f64,
    /// `E[P_rd * P(K = 0 | relay transmitting)]`.
    pub deliver_and_idle: f64,
    /// `E[(1 - P_rd) P(K = k) + P_rd P(K = k + 1)]` for `k = 0..=n`.
    pub net_growth: Vec<f64>,
}

impl RelayLaw {
    pub fn compute(table: &SuccessTable, mix: &StrategyMix, n: u32, q_tx: f64) -> Result<Self> {
        if table.metadata().n_ues < n {
            return Err(Error::config(
                "n_ues",
                format!("success table covers {} UEs, need {n}", table.metadata().n_ues),
            ));
        }
        let len = n as usize + 1;
        let mut silent = vec![CompensatedSum::new(); len];
        let mut active = vec![CompensatedSum::new(); len];
        let mut growth = vec![CompensatedSum::new(); len];
        let mut b_r = CompensatedSum::new();
        let mut idle = CompensatedSum::new();
        let mut failure = None;
        for_each_crowd(n, q_tx, mix, |w, c| {
            if failure.is_some() {
                return;
            }
            let mut step = || -> Result<()> {
                let pmf0 = admission_pmf(c, admission(table, c, false)?);
                let pmf1 = admission_pmf(c, admission(table, c, true)?);
                let p_rd = relay_delivery(table, c)?;
                for (k, &p) in pmf0.iter().enumerate() {
                    silent[k].add(w * p);
                }
                for (k, &p) in pmf1.iter().enumerate() {
                    active[k].add(w * p);
                    growth[k].add(w * (1.0 - p_rd) * p);
                    if k >= 1 {
                        growth[k - 1].add(w * p_rd * p);
                    }
                }
                b_r.add(w * p_rd);
                idle.add(w * p_rd * pmf1[0]);
                Ok(())
            };
            if let Err(e) = step() {
                failure = Some(e);
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let v = |x: Vec<CompensatedSum>| x.into_iter().map(|s| s.value()).collect::<Vec<_>>();
        Ok(Self {
            n,
            q_tx,
            q_r: mix.q_r,
            arrivals_silent: v(silent),
            arrivals_active: v(active),
            b_r: b_r.value(),
            deliver_and_idle: idle.value(),
            net_growth: v(growth),
        })
    }

    pub fn lambda0(&self) -> f64 {
        mean(&self.arrivals_silent)
    }

    pub fn a_r(&self) -> f64 {
        mean(&self.arrivals_active)
    }

    pub fn lambda1(&self) -> f64 {
        (1.0 - self.q_r) * self.lambda0() + self.q_r * self.a_r()
    }

    pub fn mu_r(&self) -> f64 {
        self.q_r * self.b_r
    }
}

fn mean(pmf: &[f64]) -> f64 {
    pmf.iter()
        .enumerate()
        .map(|(k, &p)| k as f64 * p)
        .sum::<CompensatedSum>()
        .value()
}

/// Batch-arrival law at the relay. With `relay_active` the law is the one
/// seen while the relay transmits (no `q_r` mixing applied).
pub fn batch_arrival_pmf(table: &SuccessTable, mix: &StrategyMix, n: u32, relay_active: bool) -> Result<Vec<f64>> {
    let law = RelayLaw::compute(table, mix, n, actual_tx_prob(mix))?;
    Ok(if relay_active {
        law.arrivals_active
    } else {
        law.arrivals_silent
    })
}

/// Arrival rates `(lambda0, a_r, lambda1)`.
pub fn arrival_rates(table: &SuccessTable, mix: &StrategyMix, n: u32) -> Result<(f64, f64, f64)> {
    let law = RelayLaw::compute(table, mix, n, actual_tx_prob(mix))?;
    Ok((law.lambda0(), law.a_r(), law.lambda1()))
}

/// Service quantities `(b_r, mu_r)`.
pub fn service_rate(table: &SuccessTable, mix: &StrategyMix, n: u32) -> Result<(f64, f64)> {
    let law = RelayLaw::compute(table, mix, n, actual_tx_prob(mix))?;
    Ok((law.b_r, law.mu_r()))
}

/// Smallest relay access probability that keeps the queue stable.
/// `None` means no `q_r` in `[0, 1]` stabilizes it.
pub fn min_relay_prob(lambda0: f64, a_r: f64, b_r: f64) -> Option<f64> {
    if lambda0 == 0.0 {
        return Some(0.0);
    }
    let denom = lambda0 + b_r - a_r;
    if denom <= 0.0 {
        return None;
    }
    let q = lambda0 / denom;
    (q < 1.0).then_some(q)
}

/// Loynes' criterion for the relay queue.
pub fn is_stable(lambda0: f64, a_r: f64, b_r: f64, q_r: f64) -> bool {
    if lambda0 == 0.0 {
        return true;
    }
    let lambda1 = (1.0 - q_r) * lambda0 + q_r * a_r;
    lambda1 < q_r * b_r
}

/// Summary of the relay queue at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueReport {
    pub q_tx: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub a_r: f64,
    pub b_r: f64,
    pub mu_r: f64,
    /// `None` when the queue is unstable for every `q_r`.
    pub q_rmin: Option<f64>,
    pub stable: bool,
    pub p_empty: Option<f64>,
    /// Long-run admission rate `P(Q=0) lambda0 + P(Q!=0) lambda1`.
    pub lambda_r: Option<f64>,
    pub q_bar: Option<f64>,
    /// Mean time a packet waits in the relay queue before its successful
    /// transmission starts.
    pub d_q: Option<f64>,
    /// Mean relay sojourn: waiting plus transmission.
    pub d_rel: Option<f64>,
}

impl QueueReport {
    pub fn from_law(law: &RelayLaw) -> Result<(Self, TransitionKernel)> {
        let kernel = transition_kernel_from_law(law)?;
        let lambda0 = law.lambda0();
        let a_r = law.a_r();
        let stable = is_stable(lambda0, a_r, law.b_r, law.q_r);
        let mu_r = law.mu_r();
        let lambda1 = law.lambda1();
        let (p_empty, lambda_r, q_bar, d_q, d_rel) = if !stable {
            (None, None, None, None, None)
        } else if lambda0 == 0.0 {
            (Some(1.0), Some(0.0), Some(0.0), Some(0.0), Some(1.0 / mu_r))
        } else {
            let p0 = prob_empty(&kernel, lambda0)?;
            let q_bar = avg_queue_size(&kernel, lambda0)?;
            let lambda_r = p0 * lambda0 + (1.0 - p0) * lambda1;
            let (d_q, d_rel) = relay_delay(q_bar, lambda_r, mu_r);
            (Some(p0), Some(lambda_r), Some(q_bar), Some(d_q), Some(d_rel))
        };
        Ok((
            Self {
                q_tx: law.q_tx,
                lambda0,
                lambda1,
                a_r,
                b_r: law.b_r,
                mu_r,
                q_rmin: min_relay_prob(lambda0, a_r, law.b_r),
                stable,
                p_empty,
                lambda_r,
                q_bar,
                d_q,
                d_rel,
            },
            kernel,
        ))
    }

    /// `lambda1 - mu_r`.
    pub fn drift(&self) -> f64 {
        self.lambda1 - self.mu_r
    }

    pub fn p_nonempty(&self) -> f64 {
        self.p_empty.map_or(1.0, |p| 1.0 - p)
    }
}

/// Relay waiting time and sojourn `(d_q, d_rel)` from the mean queue size.
///
/// The queue is observed at slot boundaries, so Little's law applied to the
/// mean content gives the full sojourn of an admitted packet including its
/// successful transmission slot(s); the waiting part excludes the mean
/// service time `1 / mu_r`.
pub fn relay_delay(q_bar: f64, lambda_r: f64, mu_r: f64) -> (f64, f64) {
    if lambda_r <= 0.0 {
        return (0.0, 1.0 / mu_r);
    }
    let d_rel = q_bar / lambda_r;
    (d_rel - 1.0 / mu_r, d_rel)
}

pub(crate) fn transition_kernel_from_law(law: &RelayLaw) -> Result<TransitionKernel> {
    kernel::from_law(law)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix(q_u: f64, q_uf: f64, q_ur: f64, d_a: f64) -> StrategyMix {
        StrategyMix {
            q_u,
            q_uf,
            q_ur,
            q_r: 0.7,
            d_a,
        }
    }

    #[test]
    fn repeat_probability_examples() {
        assert_eq!(repeat_probability(&mix(0.5, 1.0, 0.0, 0.0)), 1.0);
        assert_eq!(repeat_probability(&mix(0.5, 0.0, 0.3, 0.0)), 1.0);
        assert!((repeat_probability(&mix(0.5, 0.5, 0.5, 0.0)) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn transmit_probability_examples() {
        assert_eq!(actual_tx_prob(&mix(0.9, 0.5, 0.5, 0.0)), 0.9);
        assert_eq!(actual_tx_prob(&mix(0.5, 1.0, 1.0, 7.0)), 0.5);
        let q = actual_tx_prob(&mix(0.5, 0.5, 0.5, 5.0));
        assert!((q - 0.5 / 2.5625).abs() < 1e-15);
        assert!((q - 0.19512).abs() < 1e-5);
    }

    #[test]
    fn variable_alignment_reduces_to_fixed() {
        for d in [0.0, 1.0, 3.24, 10.0] {
            let m = mix(0.3, 0.4, 0.7, d);
            let a = actual_tx_prob(&m);
            let b = actual_tx_prob_variable(&m, d, d);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn crowd_weights_sum_to_one() {
        let m = mix(0.3, 0.4, 0.7, 0.0);
        let mut total = CompensatedSum::new();
        let mut count = 0;
        for_each_crowd(6, 0.3, &m, |w, c| {
            assert!(c.fm + c.fr + c.b <= 6);
            total.add(w);
            count += 1;
        });
        assert!((total.value() - 1.0).abs() < 1e-14);
        assert_eq!(count, 84);
    }

    #[test]
    fn stability_edge_cases() {
        assert_eq!(min_relay_prob(0.0, 0.0, 0.5), Some(0.0));
        assert!((min_relay_prob(0.2, 0.2, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(min_relay_prob(0.5, 0.3, 0.2), None);
        assert_eq!(min_relay_prob(0.2, 0.9, 0.5), None);
        let q = min_relay_prob(0.2, 0.25, 0.6).unwrap();
        let l1 = (1.0 - q) * 0.2 + q * 0.25;
        assert!((l1 - q * 0.6).abs() < 1e-15);
        assert!(is_stable(0.2, 0.25, 0.6, q + 1e-6));
        assert!(!is_stable(0.2, 0.25, 0.6, q - 1e-6));
    }

    #[test]
    fn relay_delay_limits() {
        // One packet per slot admitted and served immediately.
        let (d_q, d_rel) = relay_delay(0.1, 0.1, 1.0);
        assert_eq!(d_rel, 1.0);
        assert_eq!(d_q, 0.0);
        let (d_q, d_rel) = relay_delay(0.0, 0.0, 1.0);
        assert_eq!((d_q, d_rel), (0.0, 1.0));
        let (d_q, d_rel) = relay_delay(3.0, 0.2, 0.5);
        assert!((d_rel - d_q - 2.0).abs() < 1e-15);
    }
}
