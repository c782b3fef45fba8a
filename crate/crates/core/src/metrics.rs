//! Aggregate throughput and per-packet delay.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{Link, Scheme, SuccessTable};
use crate::config::{SceneConfig, StrategyMix};
use crate::error::Result;
use crate::numeric::CompensatedSum;
use crate::queueing::{
    actual_tx_prob, actual_tx_prob_variable, for_each_crowd, QueueReport, RelayLaw, TransitionKernel,
};

/// Relative gap between arrival and service rate below which an operating
/// point is flagged as close to the stability boundary.
pub const NEAR_INSTABILITY_GAP: f64 = 1e-2;

/// Conditional per-user success probabilities given the chosen strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// Directional packet decoded by the access point.
    pub ud_f: f64,
    /// Broadcast packet decoded by the access point.
    pub ud_b: f64,
    /// Directional packet decoded by the relay.
    pub ur_f: f64,
    /// Broadcast packet missed by the access point and decoded by the relay.
    pub ur_b: f64,
}

impl Components {
    /// Probability that a transmitted packet leaves the UE.
    pub fn per_user(&self, mix: &StrategyMix) -> f64 {
        mix.q_fm() * self.ud_f + mix.q_fr() * self.ur_f + mix.q_b() * (self.ud_b + self.ur_b)
    }

    /// Probability that a transmitted packet is handed to the relay.
    pub fn relay_share(&self, mix: &StrategyMix) -> f64 {
        mix.q_fr() * self.ur_f + mix.q_b() * self.ur_b
    }

    /// Probability that a transmitted packet reaches the access point directly.
    pub fn direct_share(&self, mix: &StrategyMix) -> f64 {
        mix.q_fm() * self.ud_f + mix.q_b() * self.ud_b
    }
}

/// Components for a tagged UE when the other `n - 1` UEs transmit with
/// probability `q_tx` and the relay transmits with probability
/// `relay_weight`.
pub fn throughput_components(
    table: &SuccessTable,
    mix: &StrategyMix,
    n: u32,
    q_tx: f64,
    relay_weight: f64,
) -> Result<Components> {
    let mut acc = [CompensatedSum::new(); 4];
    let mut failure = None;
    for (relay_tx, w_relay) in [(false, 1.0 - relay_weight), (true, relay_weight)] {
        if w_relay == 0.0 {
            continue;
        }
        for_each_crowd(n - 1, q_tx, mix, |w, c| {
            if failure.is_some() {
                return;
            }
            let step = || -> Result<[f64; 4]> {
                let ud_f = table.prob(Link::UeToAp, Scheme::Fd, c.fm, c.b, relay_tx)?;
                let ud_b = table.prob(Link::UeToAp, Scheme::Br, c.fm, c.b, relay_tx)?;
                let ur_f = table.prob(Link::UeToRelay, Scheme::Fd, c.fr, c.b, relay_tx)?;
                let ur_b = table.prob(Link::UeToRelay, Scheme::Br, c.fr, c.b, relay_tx)? * (1.0 - ud_b);
                Ok([ud_f, ud_b, ur_f, ur_b])
            };
            match step() {
                Ok(v) => {
                    for (a, x) in acc.iter_mut().zip(v) {
                        a.add(w * w_relay * x);
                    }
                }
                Err(e) => failure = Some(e),
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let [ud_f, ud_b, ur_f, ur_b] = acc.map(|a| a.value());
    Ok(Components { ud_f, ud_b, ur_f, ur_b })
}

/// Aggregate network throughput in packets per slot.
pub fn aggregate_throughput(c: &Components, mix: &StrategyMix, n: u32, q_tx: f64, queue: &QueueReport) -> f64 {
    let n = f64::from(n);
    if queue.stable {
        n * q_tx * c.per_user(mix)
    } else {
        n * q_tx * c.direct_share(mix) + queue.mu_r
    }
}

/// Per-source attribution of the mean packet delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub ue_tx: f64,
    pub relay_tx: f64,
    pub queueing: f64,
    pub alignment: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.ue_tx + self.relay_tx + self.queueing + self.alignment
    }

    fn infinite() -> Self {
        Self {
            ue_tx: f64::INFINITY,
            relay_tx: f64::INFINITY,
            queueing: f64::INFINITY,
            alignment: f64::INFINITY,
        }
    }
}

/// Alignment penalty factor of the fixed-duration delay formula.
pub fn alignment_factor(c: &Components, mix: &StrategyMix) -> f64 {
    let (f, b) = alignment_factors(c, mix);
    f + b
}

/// Split alignment factors `(directional, broadcast)` of the
/// strategy-dependent delay formula.
pub fn alignment_factors(c: &Components, mix: &StrategyMix) -> (f64, f64) {
    let t_u = c.per_user(mix);
    let (fm, fr, b) = (mix.q_fm(), mix.q_fr(), mix.q_b());
    let directional = fm * fm * (c.ud_f - t_u - 1.0) + fr * fr * (c.ur_f - t_u - 1.0);
    let broadcast = 1.0 + b * b * (c.ud_b + c.ur_b - t_u - 1.0);
    (directional, broadcast)
}

/// Relay-side delay terms consumed by the packet delay formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayDelay {
    pub d_q: f64,
    pub service: f64,
}

impl RelayDelay {
    pub fn from_queue(q: &QueueReport) -> Option<Self> {
        Some(Self {
            d_q: q.d_q?,
            service: 1.0 / q.mu_r,
        })
    }

    pub fn total(&self) -> f64 {
        self.d_q + self.service
    }
}

fn breakdown(c: &Components, mix: &StrategyMix, relay: RelayDelay, alignment_numerator: f64) -> DelayBreakdown {
    let t_u = c.per_user(mix);
    let share = c.relay_share(mix);
    // Packets that never use the relay contribute nothing to the relay terms,
    // even when the relay itself cannot deliver.
    let relay_term = |d: f64| if share == 0.0 { 0.0 } else { d * share / t_u };
    DelayBreakdown {
        ue_tx: 1.0 / (mix.q_u * t_u),
        relay_tx: relay_term(relay.service),
        queueing: relay_term(relay.d_q),
        alignment: alignment_numerator / t_u,
    }
}

/// Mean delay of a packet from reaching the head of its UE queue to its
/// delivery, with a common alignment duration `mix.d_a`.
pub fn packet_delay(c: &Components, mix: &StrategyMix, relay: Option<RelayDelay>) -> (f64, DelayBreakdown) {
    let Some(relay) = relay else {
        return (f64::INFINITY, DelayBreakdown::infinite());
    };
    if mix.q_u * c.per_user(mix) <= 0.0 {
        return (f64::INFINITY, DelayBreakdown::infinite());
    }
    let t_u = c.per_user(mix);
    let share = c.relay_share(mix);
    let relay_num = if share == 0.0 { 0.0 } else { mix.q_u * relay.total() * share };
    let d = (1.0 + relay_num + mix.d_a * mix.q_u * alignment_factor(c, mix)) / (mix.q_u * t_u);
    (d, breakdown(c, mix, relay, mix.d_a * alignment_factor(c, mix)))
}

/// Mean delay when directional and broadcast alignments last `d_a_f` and
/// `d_a_b` slots respectively.
pub fn packet_delay_variable_alignment(
    c: &Components,
    mix: &StrategyMix,
    relay: Option<RelayDelay>,
    d_a_f: f64,
    d_a_b: f64,
) -> (f64, DelayBreakdown) {
    let Some(relay) = relay else {
        return (f64::INFINITY, DelayBreakdown::infinite());
    };
    if mix.q_u * c.per_user(mix) <= 0.0 {
        return (f64::INFINITY, DelayBreakdown::infinite());
    }
    let t_u = c.per_user(mix);
    let share = c.relay_share(mix);
    let (cf, cb) = alignment_factors(c, mix);
    let relay_num = if share == 0.0 { 0.0 } else { mix.q_u * relay.total() * share };
    let d = (1.0 + relay_num + mix.q_u * (d_a_f * cf + d_a_b * cb)) / (mix.q_u * t_u);
    (d, breakdown(c, mix, relay, d_a_f * cf + d_a_b * cb))
}

/// Per-strategy delays `[d_fm, d_fr, d_b]` from the first-step recursion
/// over the strategy of the next attempt, and the resulting mean delay.
pub fn packet_delay_recursive(c: &Components, mix: &StrategyMix, d_r: f64) -> Option<([f64; 3], f64)> {
    let q = [mix.q_fm(), mix.q_fr(), mix.q_b()];
    let success = [c.ud_f, c.ur_f, c.ud_b + c.ur_b];
    let via_relay = [0.0, c.ur_f, c.ur_b];
    let q_u = mix.q_u;
    let d_a = mix.d_a;
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..3 {
        let fail = q_u * (1.0 - success[i]);
        for j in 0..3 {
            a[i][j] = -fail * q[j];
        }
        a[i][i] += q_u;
        let switch: f64 = (0..3).filter(|&j| j != i).map(|j| q[j]).sum();
        let relay = if via_relay[i] == 0.0 { 0.0 } else { q_u * via_relay[i] * d_r };
        rhs[i] = q_u * success[i] + relay + fail * (1.0 + d_a * switch) + (1.0 - q_u);
    }
    let d = solve3(a, rhs)?;
    let total = (0..3).map(|i| q[i] * (d[i] + (1.0 - q[i]) * d_a)).sum();
    Some((d, total))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Number of beams needed to cover the plane with width `theta_bw`.
pub fn beam_count(theta_bw: f64) -> f64 {
    (2.0 * PI / theta_bw - 1e-9).ceil()
}

/// Alignment durations `(d_a_f, d_a_b)` in slots for an exhaustive beam
/// search with `m_pilots` pilots per slot and `l_dirs` parallel directions.
pub fn alignment_durations(theta_bw_f: f64, theta_bw_b: f64, theta_bw_ap: f64, m_pilots: f64, l_dirs: f64) -> (f64, f64) {
    let ap = beam_count(theta_bw_ap);
    let relay = ap;
    let denom = l_dirs * m_pilots;
    (
        beam_count(theta_bw_f) * ap / denom,
        beam_count(theta_bw_b) * ap * relay / denom,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stable,
    Unstable,
    NearInstability,
}

impl Regime {
    pub fn classify(q: &QueueReport) -> Self {
        let gap = (q.lambda1 - q.mu_r).abs();
        if q.lambda0 > 0.0 && q.mu_r > 0.0 && gap / q.mu_r < NEAR_INSTABILITY_GAP {
            Regime::NearInstability
        } else if q.stable {
            Regime::Stable
        } else {
            Regime::Unstable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Stable => "stable",
            Regime::Unstable => "unstable",
            Regime::NearInstability => "near_instability",
        }
    }
}

/// Throughput and delay of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub t_aggregate: f64,
    pub t_ud_f: f64,
    pub t_ud_b: f64,
    pub t_ur_f: f64,
    pub t_ur_b: f64,
    pub t_u: f64,
    pub d_total: f64,
    pub d_breakdown: DelayBreakdown,
    pub regime: Regime,
}

/// Full analytical evaluation of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub queue: QueueReport,
    pub kernel: TransitionKernel,
    pub components: Components,
    pub perf: PerfReport,
    /// `(d_a_f, d_a_b)` when strategy-dependent alignment is configured.
    pub alignment: Option<(f64, f64)>,
}

/// Alignment durations implied by the configuration, if any.
pub fn configured_alignment(cfg: &SceneConfig) -> Option<(f64, f64)> {
    cfg.alignment
        .map(|a| alignment_durations(cfg.theta_bw_f, cfg.theta_b(), a.theta_bw_ap, a.m_pilots, a.l_dirs))
}

/// Transmit probability for the configuration.
pub fn configured_tx_prob(cfg: &SceneConfig) -> f64 {
    let mix = cfg.mix();
    match configured_alignment(cfg) {
        Some((f, b)) => actual_tx_prob_variable(&mix, f, b),
        None => actual_tx_prob(&mix),
    }
}

/// Analyse a configuration with a table covering at least `cfg.n_ues` UEs.
pub fn analyze(cfg: &SceneConfig, table: &SuccessTable) -> Result<Analysis> {
    cfg.validate()?;
    let mix = cfg.mix();
    let alignment = configured_alignment(cfg);
    let q_tx = configured_tx_prob(cfg);
    let law = RelayLaw::compute(table, &mix, cfg.n_ues, q_tx)?;
    let (queue, kernel) = QueueReport::from_law(&law)?;
    let relay_weight = mix.q_r * queue.p_nonempty();
    let components = throughput_components(table, &mix, cfg.n_ues, q_tx, relay_weight)?;
    let t_aggregate = aggregate_throughput(&components, &mix, cfg.n_ues, q_tx, &queue);
    let relay = RelayDelay::from_queue(&queue);
    let (d_total, d_breakdown) = match alignment {
        Some((f, b)) => packet_delay_variable_alignment(&components, &mix, relay, f, b),
        None => packet_delay(&components, &mix, relay),
    };
    let perf = PerfReport {
        t_aggregate,
        t_ud_f: components.ud_f,
        t_ud_b: components.ud_b,
        t_ur_f: components.ur_f,
        t_ur_b: components.ur_b,
        t_u: components.per_user(&mix),
        d_total,
        d_breakdown,
        regime: Regime::classify(&queue),
    };
    Ok(Analysis {
        queue,
        kernel,
        components,
        perf,
        alignment,
    })
}
