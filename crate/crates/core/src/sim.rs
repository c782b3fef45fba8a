//! Slot-level Monte-Carlo simulation of the relay-assisted network.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, InterfererDraw, Link, LinkDraw, Scheme, SuccessTable};
use crate::config::{SceneConfig, Strategy, StrategyMix};
use crate::error::{Error, Result};
use crate::metrics::{configured_alignment, DelayBreakdown};

/// How decoding outcomes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Independent Bernoulli draws with the tabulated probabilities.
    #[default]
    Table,
    /// Fresh LOS states, shadowing and pointing errors every slot, with all
    /// concurrent transmissions evaluated jointly.
    Physical,
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "table" => Ok(SimMode::Table),
            "physical" => Ok(SimMode::Physical),
            other => Err(format!("unknown simulation mode `{other}` (expected table or physical)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub slots: u64,
    pub seed: u64,
    pub mode: SimMode,
    /// Fraction of initial slots excluded from the statistics.
    pub warmup_fraction: f64,
    /// Record the relay queue length every `stride` slots (0 disables).
    pub trajectory_stride: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            slots: 100_000,
            seed: 1,
            mode: SimMode::Table,
            warmup_fraction: 0.1,
            trajectory_stride: 0,
        }
    }
}

/// Per-UE protocol state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    /// Alignment slots still to go before the pending transmission.
    pub aligning_remaining: u32,
    pub pending_strategy: Option<Strategy>,
    pub last_attempt_strategy: Strategy,
    /// Slot in which the current head packet reached the head of the queue.
    pub head_slot: u64,
    /// Alignment slots spent on the current head packet.
    pub head_alignment: u64,
    pub delivered_count: u64,
    pub delivered_delay_sum: u64,
    pub transmissions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayPacket {
    pub source_ue: u32,
    pub head_slot: u64,
    pub ue_alignment: u64,
    pub admit_slot: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    pub fifo: VecDeque<RelayPacket>,
    /// Slot from which the current FIFO head has been at the head.
    pub head_since: u64,
}

/// Packet accounting used to check conservation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub admitted: u64,
    pub relay_delivered: u64,
    pub final_fifo: u64,
    pub direct_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub slots: u64,
    pub seed: u64,
    pub measured_slots: u64,
    pub t_empirical: f64,
    pub d_empirical: f64,
    pub d_breakdown: DelayBreakdown,
    pub q_tx_empirical: f64,
    pub p_empty_empirical: f64,
    pub q_bar_empirical: f64,
    /// Relay admissions per measured slot.
    pub lambda_empirical: f64,
    /// Relay departures per measured slot with a non-empty queue.
    pub mu_empirical: f64,
    pub relay_sojourn_empirical: f64,
    pub relay_wait_empirical: f64,
    pub delivered_packets: u64,
    pub conservation: Conservation,
    /// Relay queue length sampled every `trajectory_stride` slots.
    pub trajectory: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    Idle,
    Align,
    Transmit(Strategy),
}

fn draw_strategy<R: Rng>(rng: &mut R, mix: &StrategyMix) -> Strategy {
    let u: f64 = rng.random();
    if u < mix.q_fm() {
        Strategy::DirectFd
    } else if u < mix.q_fm() + mix.q_fr() {
        Strategy::RelayFd
    } else {
        Strategy::Broadcast
    }
}

/// Decoding outcomes of one slot.
struct SlotOutcome {
    /// Per transmitting UE: (decoded at access point, decoded at relay).
    ue: Vec<(bool, bool)>,
    relay_delivered: bool,
}

struct Counts {
    fm: u32,
    fr: u32,
    b: u32,
}

fn table_outcomes<R: Rng>(
    rng: &mut R,
    table: &SuccessTable,
    tx: &[(usize, Strategy)],
    c: &Counts,
    relay_tx: bool,
) -> Result<SlotOutcome> {
    let mut ue = Vec::with_capacity(tx.len());
    for &(_, s) in tx {
        let (ap, relay) = match s {
            Strategy::DirectFd => {
                let p = table.prob(Link::UeToAp, Scheme::Fd, c.fm - 1, c.b, relay_tx)?;
                (rng.random::<f64>() < p, false)
            }
            Strategy::RelayFd => {
                let p = table.prob(Link::UeToRelay, Scheme::Fd, c.fr - 1, c.b, relay_tx)?;
                (false, rng.random::<f64>() < p)
            }
            Strategy::Broadcast => {
                let p_ap = table.prob(Link::UeToAp, Scheme::Br, c.fm, c.b - 1, relay_tx)?;
                let p_relay = table.prob(Link::UeToRelay, Scheme::Br, c.fr, c.b - 1, relay_tx)?;
                (rng.random::<f64>() < p_ap, rng.random::<f64>() < p_relay)
            }
        };
        ue.push((ap, relay));
    }
    let relay_delivered = if relay_tx {
        let p = table.prob(Link::RelayToAp, Scheme::Fd, c.fm, c.b, false)?;
        rng.random::<f64>() < p
    } else {
        false
    };
    Ok(SlotOutcome { ue, relay_delivered })
}

struct Emission {
    signal: f64,
    interference: f64,
}

fn emission<R: Rng>(rng: &mut R, ch: &Channel, link: Link, scheme: Scheme) -> Emission {
    let (p_los, pg_tx) = match link {
        Link::RelayToAp => (1.0, ch.pg_f),
        l => (ch.ue_budget(l).p_los, ch.tx_gain(scheme).1),
    };
    let los = rng.random::<f64>() < p_los;
    let z: f64 = rng.sample(StandardNormal);
    let tx_aligned = rng.random::<f64>() < pg_tx;
    let rx_aligned = rng.random::<f64>() < ch.pg_f;
    let signal = ch.signal_power(
        link,
        scheme,
        &LinkDraw {
            los,
            shadow_z: z,
            tx_aligned,
            rx_aligned,
        },
    );
    let d = InterfererDraw {
        los,
        shadow_z: z,
        tx_aligned,
    };
    let interference = match link {
        Link::RelayToAp => ch.relay_interference(&d),
        l => ch.ue_interference(l, scheme, &d),
    };
    Emission { signal, interference }
}

fn joint_decode(ch: &Channel, emissions: &[Emission], extra: f64) -> Vec<bool> {
    let total: f64 = emissions.iter().map(|e| e.interference).sum();
    emissions
        .iter()
        .map(|e| ch.decodes(e.signal, (total - e.interference).max(0.0), extra))
        .collect()
}

fn physical_outcomes<R: Rng>(rng: &mut R, ch: &Channel, tx: &[(usize, Strategy)], relay_tx: bool) -> SlotOutcome {
    // Emitters heard at the access point: direct FD, broadcast, relay.
    let mut ap_idx = Vec::new();
    let mut ap_em = Vec::new();
    let mut relay_idx = Vec::new();
    let mut relay_em = Vec::new();
    for (k, &(_, s)) in tx.iter().enumerate() {
        match s {
            Strategy::DirectFd => {
                ap_idx.push(k);
                ap_em.push(emission(rng, ch, Link::UeToAp, Scheme::Fd));
            }
            Strategy::RelayFd => {
                relay_idx.push(k);
                relay_em.push(emission(rng, ch, Link::UeToRelay, Scheme::Fd));
            }
            Strategy::Broadcast => {
                ap_idx.push(k);
                ap_em.push(emission(rng, ch, Link::UeToAp, Scheme::Br));
                relay_idx.push(k);
                relay_em.push(emission(rng, ch, Link::UeToRelay, Scheme::Br));
            }
        }
    }
    if relay_tx {
        ap_em.push(emission(rng, ch, Link::RelayToAp, Scheme::Fd));
    }
    let ap_ok = joint_decode(ch, &ap_em, 0.0);
    let si = if relay_tx { ch.self_interference() } else { 0.0 };
    let relay_ok = joint_decode(ch, &relay_em, si);
    let mut ue = vec![(false, false); tx.len()];
    for (j, &k) in ap_idx.iter().enumerate() {
        ue[k].0 = ap_ok[j];
    }
    for (j, &k) in relay_idx.iter().enumerate() {
        ue[k].1 = relay_ok[j];
    }
    let relay_delivered = relay_tx && *ap_ok.last().unwrap();
    SlotOutcome { ue, relay_delivered }
}

#[derive(Default)]
struct Accumulators {
    measured_slots: u64,
    tx_events: u64,
    delivered: u64,
    delay_sum: u64,
    ue_phase_sum: u64,
    alignment_sum: u64,
    relay_wait_sum: u64,
    relay_tx_sum: u64,
    empty_slots: u64,
    queue_sum: u64,
    admissions: u64,
    departures: u64,
    busy_slots: u64,
    sojourn_sum: u64,
    sojourn_count: u64,
}

/// Simulate `opts.slots` slots.
pub fn run_simulation(cfg: &SceneConfig, table: &SuccessTable, opts: &SimOptions) -> Result<SimResult> {
    run_simulation_traced(cfg, table, opts, None)
}

/// Like [`run_simulation`], optionally writing one trace line per slot:
/// `slot,queue_length,ue_states` where each UE is one of `.` (idle),
/// `a` (aligning), `m`, `r`, `b` (transmitting with that strategy).
pub fn run_simulation_traced(
    cfg: &SceneConfig,
    table: &SuccessTable,
    opts: &SimOptions,
    mut trace: Option<&mut dyn Write>,
) -> Result<SimResult> {
    cfg.validate()?;
    if opts.slots == 0 {
        return Err(Error::config("slots", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&opts.warmup_fraction) {
        return Err(Error::config("warmup_fraction", "must lie in [0, 1)"));
    }
    table.check_covers(cfg.n_ues)?;
    let mix = cfg.mix();
    let (align_f, align_b) = match configured_alignment(cfg) {
        Some((f, b)) => (f.ceil() as u32, b.ceil() as u32),
        None => (cfg.d_a.ceil() as u32, cfg.d_a.ceil() as u32),
    };
    let align_for = |s: Strategy| match s {
        Strategy::Broadcast => align_b,
        _ => align_f,
    };
    let channel = match opts.mode {
        SimMode::Physical => Some(Channel::new(cfg)?),
        SimMode::Table => None,
    };
    let n = cfg.n_ues as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ues: Vec<UeState> = (0..n)
        .map(|_| UeState {
            aligning_remaining: 0,
            pending_strategy: None,
            last_attempt_strategy: draw_strategy(&mut rng, &mix),
            head_slot: 0,
            head_alignment: 0,
            delivered_count: 0,
            delivered_delay_sum: 0,
            transmissions: 0,
        })
        .collect();
    let mut relay = RelayState::default();
    let mut cons = Conservation::default();
    let mut acc = Accumulators::default();
    let mut trajectory = Vec::new();
    let warmup = (opts.slots as f64 * opts.warmup_fraction).floor() as u64;
    let mut actions = vec![Action::Idle; n];
    let mut tx: Vec<(usize, Strategy)> = Vec::with_capacity(n);

    for t in 0..opts.slots {
        let measuring = t >= warmup;
        let queue_len = relay.fifo.len() as u64;
        if opts.trajectory_stride > 0 && t % opts.trajectory_stride == 0 {
            trajectory.push(queue_len);
        }
        if measuring {
            acc.measured_slots += 1;
            acc.queue_sum += queue_len;
            if queue_len == 0 {
                acc.empty_slots += 1;
            } else {
                acc.busy_slots += 1;
            }
        }
        let relay_tx = queue_len > 0 && rng.random::<f64>() < mix.q_r;

        tx.clear();
        for (u, ue) in ues.iter_mut().enumerate() {
            let action = if let Some(s) = ue.pending_strategy {
                if ue.aligning_remaining > 0 {
                    ue.aligning_remaining -= 1;
                    Action::Align
                } else {
                    ue.pending_strategy = None;
                    Action::Transmit(s)
                }
            } else if rng.random::<f64>() < mix.q_u {
                let s = draw_strategy(&mut rng, &mix);
                let d = align_for(s);
                if s != ue.last_attempt_strategy && d > 0 {
                    ue.last_attempt_strategy = s;
                    ue.pending_strategy = Some(s);
                    ue.aligning_remaining = d - 1;
                    Action::Align
                } else {
                    ue.last_attempt_strategy = s;
                    Action::Transmit(s)
                }
            } else {
                Action::Idle
            };
            match action {
                Action::Align => ue.head_alignment += 1,
                Action::Transmit(s) => {
                    tx.push((u, s));
                    ue.transmissions += 1;
                }
                Action::Idle => {}
            }
            actions[u] = action;
        }
        if measuring {
            acc.tx_events += tx.len() as u64;
        }

        let counts = Counts {
            fm: tx.iter().filter(|x| x.1 == Strategy::DirectFd).count() as u32,
            fr: tx.iter().filter(|x| x.1 == Strategy::RelayFd).count() as u32,
            b: tx.iter().filter(|x| x.1 == Strategy::Broadcast).count() as u32,
        };
        let outcome = match &channel {
            None => table_outcomes(&mut rng, table, &tx, &counts, relay_tx)?,
            Some(ch) => physical_outcomes(&mut rng, ch, &tx, relay_tx),
        };

        // Departures before arrivals.
        if outcome.relay_delivered {
            let p = relay.fifo.pop_front().expect("relay transmits only when non-empty");
            cons.relay_delivered += 1;
            let ue = &mut ues[p.source_ue as usize];
            let delay = t - p.head_slot + 1;
            ue.delivered_count += 1;
            ue.delivered_delay_sum += delay;
            if measuring {
                acc.departures += 1;
                acc.delivered += 1;
                acc.delay_sum += delay;
                acc.alignment_sum += p.ue_alignment;
                acc.ue_phase_sum += p.admit_slot - p.head_slot + 1 - p.ue_alignment;
                acc.relay_wait_sum += relay.head_since - (p.admit_slot + 1);
                acc.relay_tx_sum += t - relay.head_since + 1;
                acc.sojourn_sum += t - p.admit_slot;
                acc.sojourn_count += 1;
            }
            relay.head_since = t + 1;
        }
        for (k, &(u, s)) in tx.iter().enumerate() {
            let (at_ap, at_relay) = outcome.ue[k];
            let ue = &mut ues[u];
            let delivered = match s {
                Strategy::DirectFd => at_ap,
                Strategy::RelayFd => false,
                Strategy::Broadcast => at_ap,
            };
            let admitted = !delivered && at_relay;
            if delivered {
                let delay = t - ue.head_slot + 1;
                ue.delivered_count += 1;
                ue.delivered_delay_sum += delay;
                cons.direct_delivered += 1;
                if measuring {
                    acc.delivered += 1;
                    acc.delay_sum += delay;
                    acc.alignment_sum += ue.head_alignment;
                    acc.ue_phase_sum += delay - ue.head_alignment;
                }
            } else if admitted {
                if relay.fifo.is_empty() {
                    relay.head_since = t + 1;
                }
                relay.fifo.push_back(RelayPacket {
                    source_ue: u as u32,
                    head_slot: ue.head_slot,
                    ue_alignment: ue.head_alignment,
                    admit_slot: t,
                });
                cons.admitted += 1;
                if measuring {
                    acc.admissions += 1;
                }
            }
            if delivered || admitted {
                ue.head_slot = t + 1;
                ue.head_alignment = 0;
            }
        }

        if let Some(w) = trace.as_deref_mut() {
            let states: String = actions
                .iter()
                .map(|a| match a {
                    Action::Idle => '.',
                    Action::Align => 'a',
                    Action::Transmit(Strategy::DirectFd) => 'm',
                    Action::Transmit(Strategy::RelayFd) => 'r',
                    Action::Transmit(Strategy::Broadcast) => 'b',
                })
                .collect();
            writeln!(w, "{t},{queue_len},{states}")?;
        }
    }
    cons.final_fifo = relay.fifo.len() as u64;

    let m = acc.measured_slots as f64;
    let per_packet = |x: u64| {
        if acc.delivered == 0 {
            f64::NAN
        } else {
            x as f64 / acc.delivered as f64
        }
    };
    let ratio = |x: u64, y: u64| if y == 0 { f64::NAN } else { x as f64 / y as f64 };
    Ok(SimResult {
        slots: opts.slots,
        seed: opts.seed,
        measured_slots: acc.measured_slots,
        t_empirical: acc.delivered as f64 / m,
        d_empirical: per_packet(acc.delay_sum),
        d_breakdown: DelayBreakdown {
            ue_tx: per_packet(acc.ue_phase_sum),
            relay_tx: per_packet(acc.relay_tx_sum),
            queueing: per_packet(acc.relay_wait_sum),
            alignment: per_packet(acc.alignment_sum),
        },
        q_tx_empirical: acc.tx_events as f64 / (m * n as f64),
        p_empty_empirical: acc.empty_slots as f64 / m,
        q_bar_empirical: acc.queue_sum as f64 / m,
        lambda_empirical: acc.admissions as f64 / m,
        mu_empirical: ratio(acc.departures, acc.busy_slots),
        relay_sojourn_empirical: ratio(acc.sojourn_sum, acc.sojourn_count),
        relay_wait_empirical: ratio(acc.relay_wait_sum, acc.sojourn_count),
        delivered_packets: acc.delivered,
        conservation: cons,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_table(n: u32, p: f64) -> SuccessTable {
        SuccessTable::from_fn(n, |_| p)
    }

    fn cfg(n: u32) -> SceneConfig {
        SceneConfig {
            n_ues: n,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn silent_network() {
        let mut c = cfg(3);
        c.q_u = 0.0;
        let r = run_simulation(&c, &flat_table(3, 0.5), &SimOptions::default()).unwrap();
        assert_eq!(r.t_empirical, 0.0);
        assert_eq!(r.q_bar_empirical, 0.0);
        assert_eq!(r.conservation.admitted, 0);
    }

    #[test]
    fn single_direct_user_is_geometric() {
        let mut c = cfg(1);
        c.q_u = 0.4;
        c.q_uf = 1.0;
        c.q_ur = 0.0;
        let opts = SimOptions {
            slots: 400_000,
            ..SimOptions::default()
        };
        let r = run_simulation(&c, &flat_table(1, 0.5), &opts).unwrap();
        assert!((r.t_empirical - 0.2).abs() < 0.005, "{}", r.t_empirical);
        assert!((r.d_empirical - 5.0).abs() < 0.1, "{}", r.d_empirical);
    }

    #[test]
    fn deterministic_given_seed() {
        let c = cfg(4);
        let t = flat_table(4, 0.6);
        let opts = SimOptions {
            slots: 20_000,
            seed: 42,
            trajectory_stride: 100,
            ..SimOptions::default()
        };
        let a = run_simulation(&c, &t, &opts).unwrap();
        let b = run_simulation(&c, &t, &opts).unwrap();
        assert_eq!(a, b);
        let other = run_simulation(&c, &t, &SimOptions { seed: 43, ..opts }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn packets_are_conserved() {
        let mut c = cfg(5);
        c.q_u = 0.5;
        c.q_r = 0.3;
        c.d_a = 3.0;
        let r = run_simulation(
            &c,
            &flat_table(5, 0.5),
            &SimOptions {
                slots: 50_000,
                ..SimOptions::default()
            },
        )
        .unwrap();
        let k = r.conservation;
        assert_eq!(k.admitted, k.relay_delivered + k.final_fifo);
        let b = r.d_breakdown;
        let sum = b.ue_tx + b.relay_tx + b.queueing + b.alignment;
        assert!((sum - r.d_empirical).abs() < 1e-9 * r.d_empirical);
    }

    #[test]
    fn trace_lines_per_slot() {
        let c = cfg(2);
        let mut buf = Vec::new();
        run_simulation_traced(
            &c,
            &flat_table(2, 0.5),
            &SimOptions {
                slots: 10,
                ..SimOptions::default()
            },
            Some(&mut buf),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.lines().all(|l| l.split(',').nth(2).unwrap().len() == 2));
    }

    #[test]
    fn physical_mode_runs() {
        let c = SceneConfig {
            n_ues: 3,
            n_shadow_samples: 500,
            ..SceneConfig::default()
        };
        let t = crate::channel::build_success_table(&c).unwrap();
        let r = run_simulation(
            &c,
            &t,
            &SimOptions {
                slots: 5_000,
                mode: SimMode::Physical,
                ..SimOptions::default()
            },
        )
        .unwrap();
        assert!(r.t_empirical > 0.0);
    }

    #[test]
    fn missing_table_entries_are_reported() {
        let c = cfg(4);
        let err = run_simulation(&c, &flat_table(2, 0.5), &SimOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingScenario(_)));
    }
}
