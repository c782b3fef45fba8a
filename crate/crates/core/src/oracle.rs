//! Brute-force references for small networks.
//!
//! Every UE state and every per-receiver decoding outcome is enumerated
//! explicitly and weighted by its probability. No sampling is involved, so
//! the results are exact up to floating-point rounding and serve as
//! references for the compressed sums of [`crate::queueing`] and
//! [`crate::metrics`].

use serde::{Deserialize, Serialize};

use crate::channel::{Link, Scheme, SuccessTable};
use crate::config::StrategyMix;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::queueing::{actual_tx_prob, TransitionKernel};

/// Largest network handled by exhaustive enumeration.
pub const MAX_ENUMERATED_UES: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UeAction {
    Silent,
    DirectFd,
    RelayFd,
    Broadcast,
}

const ACTIONS: [UeAction; 4] = [UeAction::Silent, UeAction::DirectFd, UeAction::RelayFd, UeAction::Broadcast];

fn action_prob(a: UeAction, q_tx: f64, mix: &StrategyMix) -> f64 {
    match a {
        UeAction::Silent => 1.0 - q_tx,
        UeAction::DirectFd => q_tx * mix.q_uf * (1.0 - mix.q_ur),
        UeAction::RelayFd => q_tx * mix.q_uf * mix.q_ur,
        UeAction::Broadcast => q_tx * (1.0 - mix.q_uf),
    }
}

/// Behaviour of the relay during the enumerated slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelayMode {
    Silent,
    Transmitting,
    /// Transmits with the given probability.
    Random(f64),
}

/// Joint law of relay admissions and relay departure in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcomeLaw {
    pub n: u32,
    /// `joint[k] = [P(k admissions, no departure), P(k admissions, departure)]`.
    pub joint: Vec<[f64; 2]>,
}

impl SlotOutcomeLaw {
    pub fn arrivals(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r[0] + r[1]).collect()
    }

    pub fn mean_arrivals(&self) -> f64 {
        self.joint
            .iter()
            .enumerate()
            .map(|(k, r)| k as f64 * (r[0] + r[1]))
            .sum::<CompensatedSum>()
            .value()
    }

    pub fn departure_prob(&self) -> f64 {
        self.joint.iter().map(|r| r[1]).sum::<CompensatedSum>().value()
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().map(|r| r[0] + r[1]).sum::<CompensatedSum>().value()
    }
}

fn check_size(n: u32) -> Result<()> {
    if n == 0 || n > MAX_ENUMERATED_UES {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_ENUMERATED_UES,
        });
    }
    Ok(())
}

/// Visit every joint action profile of `n` UEs with its probability.
fn for_each_profile(n: u32, q_tx: f64, mix: &StrategyMix, mut f: impl FnMut(f64, &[UeAction]) -> Result<()>) -> Result<()> {
    let n = n as usize;
    let mut profile = vec![UeAction::Silent; n];
    for code in 0..4usize.pow(n as u32) {
        let mut c = code;
        let mut w = 1.0;
        for slot in profile.iter_mut() {
            *slot = ACTIONS[c % 4];
            c /= 4;
            w *= action_prob(*slot, q_tx, mix);
        }
        if w != 0.0 {
            f(w, &profile)?;
        }
    }
    Ok(())
}

struct Counts {
    fm: u32,
    fr: u32,
    b: u32,
}

fn counts(profile: &[UeAction]) -> Counts {
    let c = |a| profile.iter().filter(|&&x| x == a).count() as u32;
    Counts {
        fm: c(UeAction::DirectFd),
        fr: c(UeAction::RelayFd),
        b: c(UeAction::Broadcast),
    }
}

/// Per-UE decoding probabilities `(at access point, at relay)` for the
/// given profile; `None` where the receiver is not targeted.
fn decoding_probs(table: &SuccessTable, profile: &[UeAction], relay_tx: bool) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    let c = counts(profile);
    profile
        .iter()
        .map(|a| {
            Ok(match a {
                UeAction::Silent => (None, None),
                // Directional transmissions only disturb their own receiver;
                // broadcast ones disturb both.
                UeAction::DirectFd => (Some(table.prob(Link::UeToAp, Scheme::Fd, c.fm - 1, c.b, relay_tx)?), None),
                UeAction::RelayFd => (None, Some(table.prob(Link::UeToRelay, Scheme::Fd, c.fr - 1, c.b, relay_tx)?)),
                UeAction::Broadcast => (
                    Some(table.prob(Link::UeToAp, Scheme::Br, c.fm, c.b - 1, relay_tx)?),
                    Some(table.prob(Link::UeToRelay, Scheme::Br, c.fr, c.b - 1, relay_tx)?),
                ),
            })
        })
        .collect()
}

/// Law of admissions and departure for an empty (`false`) or non-empty
/// (`true`) relay queue.
pub fn enumerate_slot_outcomes(table: &SuccessTable, mix: &StrategyMix, n: u32, queue_nonempty: bool) -> Result<SlotOutcomeLaw> {
    let mode = if queue_nonempty {
        RelayMode::Random(mix.q_r)
    } else {
        RelayMode::Silent
    };
    enumerate_with_relay(table, mix, n, mode)
}

/// Enumerate one slot with an explicit relay behaviour.
pub fn enumerate_with_relay(table: &SuccessTable, mix: &StrategyMix, n: u32, mode: RelayMode) -> Result<SlotOutcomeLaw> {
    check_size(n)?;
    let q_tx = actual_tx_prob(mix);
    let mut joint = vec![[CompensatedSum::new(); 2]; n as usize + 1];
    let relay_states: Vec<(bool, f64)> = match mode {
        RelayMode::Silent => vec![(false, 1.0)],
        RelayMode::Transmitting => vec![(true, 1.0)],
        RelayMode::Random(q) => vec![(false, 1.0 - q), (true, q)],
    };
    for_each_profile(n, q_tx, mix, |w, profile| {
        let c = counts(profile);
        for &(relay_tx, w_relay) in &relay_states {
            if w_relay == 0.0 {
                continue;
            }
            let probs = decoding_probs(table, profile, relay_tx)?;
            let p_rd = if relay_tx {
                table.prob(Link::RelayToAp, Scheme::Fd, c.fm, c.b, false)?
            } else {
                0.0
            };
            // Enumerate every decoding outcome bit of every transmission.
            let bits: Vec<(usize, f64)> = probs
                .iter()
                .flat_map(|&(ap, relay)| [ap, relay])
                .enumerate()
                .filter_map(|(i, p)| p.map(|p| (i, p)))
                .collect();
            for mask in 0..(1u64 << bits.len()) {
                let mut p_outcome = w * w_relay;
                let mut decoded = vec![false; 2 * profile.len()];
                for (b, &(slot, p)) in bits.iter().enumerate() {
                    let ok = mask >> b & 1 == 1;
                    decoded[slot] = ok;
                    p_outcome *= if ok { p } else { 1.0 - p };
                }
                if p_outcome == 0.0 {
                    continue;
                }
                let admitted = profile
                    .iter()
                    .enumerate()
                    .filter(|&(u, a)| match a {
                        UeAction::RelayFd => decoded[2 * u + 1],
                        UeAction::Broadcast => decoded[2 * u + 1] && !decoded[2 * u],
                        _ => false,
                    })
                    .count();
                joint[admitted][0].add(p_outcome * (1.0 - p_rd));
                joint[admitted][1].add(p_outcome * p_rd);
            }
        }
        Ok(())
    })?;
    Ok(SlotOutcomeLaw {
        n,
        joint: joint.into_iter().map(|r| [r[0].value(), r[1].value()]).collect(),
    })
}

/// Relay moments `(lambda0, a_r, b_r)` by enumeration.
pub fn relay_moments(table: &SuccessTable, mix: &StrategyMix, n: u32) -> Result<(f64, f64, f64)> {
    let silent = enumerate_with_relay(table, mix, n, RelayMode::Silent)?;
    let active = enumerate_with_relay(table, mix, n, RelayMode::Transmitting)?;
    Ok((silent.mean_arrivals(), active.mean_arrivals(), active.departure_prob()))
}

/// Transition kernel assembled from the enumerated joint laws.
pub fn enumerated_kernel(table: &SuccessTable, mix: &StrategyMix, n: u32) -> Result<TransitionKernel> {
    let empty = enumerate_slot_outcomes(table, mix, n, false)?;
    let busy = enumerate_slot_outcomes(table, mix, n, true)?;
    let mut p1 = vec![0.0; n as usize + 2];
    for (k, r) in busy.joint.iter().enumerate() {
        p1[k + 1] += r[0];
        p1[k] += r[1];
    }
    Ok(TransitionKernel {
        n,
        p0: empty.arrivals(),
        p1,
    })
}

/// Conditional per-user success probabilities `[ud_f, ud_b, ur_f, ur_b]` of
/// a tagged UE, with the relay transmitting with probability
/// `relay_weight`, by enumerating the other `n - 1` UEs and all their
/// decoding outcomes.
pub fn throughput_components(table: &SuccessTable, mix: &StrategyMix, n: u32, relay_weight: f64) -> Result<[f64; 4]> {
    check_size(n)?;
    let q_tx = actual_tx_prob(mix);
    let mut acc = [CompensatedSum::new(); 4];
    for (relay_tx, w_relay) in [(false, 1.0 - relay_weight), (true, relay_weight)] {
        if w_relay == 0.0 {
            continue;
        }
        let others = n - 1;
        let mut visit = |w: f64, profile: &[UeAction]| -> Result<()> {
            for (slot, tagged) in [UeAction::DirectFd, UeAction::Broadcast, UeAction::RelayFd, UeAction::Broadcast]
                .into_iter()
                .enumerate()
            {
                let mut full = profile.to_vec();
                full.push(tagged);
                let probs = decoding_probs(table, &full, relay_tx)?;
                let (ap, relay) = *probs.last().unwrap();
                let p = match slot {
                    0 | 1 => ap.unwrap(),
                    2 => relay.unwrap(),
                    _ => relay.unwrap() * (1.0 - ap.unwrap()),
                };
                acc[slot].add(w * w_relay * p);
            }
            Ok(())
        };
        if others == 0 {
            visit(1.0, &[])?;
        } else {
            for_each_profile(others, q_tx, mix, &mut visit)?;
        }
    }
    Ok(acc.map(|a| a.value()))
}
