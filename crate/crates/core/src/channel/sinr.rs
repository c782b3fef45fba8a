//! Received powers and SINR for one realization of shadowing, LOS states and
//! pointing errors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::antenna::{beam_gain, gain_success_prob};
use super::propagation::{los_probability, LinkBudget};
use super::{derive_geometry, Geometry, InterferenceScenario, Link, Scheme};
use crate::config::SceneConfig;
use crate::error::{Error, Result};
use crate::numeric::{db_to_linear, dbm_to_mw};

/// Realization of the intended link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkDraw {
    pub los: bool,
    /// Standard-normal shadowing draw; scaled by the LOS-dependent deviation.
    pub shadow_z: f64,
    pub tx_aligned: bool,
    pub rx_aligned: bool,
}

/// Realization of one interfering transmitter towards the victim receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfererDraw {
    pub los: bool,
    pub shadow_z: f64,
    pub tx_aligned: bool,
}

/// Per-link random state entering one SINR evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowAndLosRealization {
    pub signal: LinkDraw,
    pub fd_interferers: Vec<InterfererDraw>,
    pub br_interferers: Vec<InterfererDraw>,
    /// Present iff the relay transmits and the receiver is the access point.
    pub relay: Option<InterfererDraw>,
}

/// Precomputed radio parameters of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub geometry: Geometry,
    pub p_t: f64,
    pub noise: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub g_f: f64,
    pub g_b: f64,
    pub pg_f: f64,
    pub pg_b: f64,
    pub ue_ap: LinkBudget,
    pub ue_relay: LinkBudget,
    pub relay_ap: LinkBudget,
}

impl Channel {
    pub fn new(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = derive_geometry(cfg)?;
        let sigma = cfg.sigma_e_deg.to_radians();
        let ue_ap = geometry.ue_ap(cfg);
        let ue_relay = geometry.ue_relay(cfg);
        let relay_ap = geometry.relay_ap(cfg);
        Ok(Self {
            geometry,
            p_t: dbm_to_mw(cfg.p_t_dbm),
            noise: dbm_to_mw(cfg.p_n_dbm),
            gamma: db_to_linear(cfg.gamma_db),
            alpha: cfg.alpha,
            beta: cfg.beta,
            g_f: beam_gain(cfg.theta_bw_f),
            g_b: beam_gain(cfg.theta_b()),
            pg_f: gain_success_prob(cfg.theta_bw_f, sigma),
            pg_b: gain_success_prob(cfg.theta_b(), sigma),
            ue_ap: LinkBudget::new(&ue_ap, cfg.fc_ghz, los_probability(ue_ap.d2d)),
            ue_relay: LinkBudget::new(&ue_relay, cfg.fc_ghz, los_probability(ue_relay.d2d)),
            relay_ap: LinkBudget::new(&relay_ap, cfg.fc_ghz, 1.0),
        })
    }

    /// Budget of a UE transmission arriving at the receiver of `link`.
    pub fn ue_budget(&self, link: Link) -> &LinkBudget {
        match link {
            Link::UeToRelay => &self.ue_relay,
            Link::UeToAp | Link::RelayToAp => &self.ue_ap,
        }
    }

    /// Transmit gain and alignment probability of a UE beam.
    #[inline]
    pub fn tx_gain(&self, scheme: Scheme) -> (f64, f64) {
        match scheme {
            Scheme::Fd => (self.g_f, self.pg_f),
            Scheme::Br => (self.g_b, self.pg_b),
        }
    }

    /// Received power for a transmitter with gain `g_tx` towards a receiver
    /// with gain `g_rx`.
    #[inline]
    pub fn rx_power(&self, budget: &LinkBudget, g_tx: f64, g_rx: f64, los: bool, z: f64) -> f64 {
        self.p_t * g_tx * g_rx * budget.attenuation(los, z)
    }

    /// Decoding rule shared by every evaluation path.
    #[inline]
    pub fn decodes(&self, signal: f64, interference: f64, extra: f64) -> bool {
        signal >= self.gamma * (self.noise + extra + self.alpha * interference)
    }

    #[inline]
    pub fn sinr(&self, signal: f64, interference: f64, extra: f64) -> f64 {
        signal / (self.noise + extra + self.alpha * interference)
    }

    /// Residual self-interference at the relay receiver.
    pub fn self_interference(&self) -> f64 {
        self.beta * self.p_t
    }

    /// Signal power of the intended link for the given realization.
    pub fn signal_power(&self, link: Link, scheme: Scheme, d: &LinkDraw) -> f64 {
        let (g_tx, budget) = match link {
            Link::RelayToAp => (self.g_f, &self.relay_ap),
            _ => (self.tx_gain(scheme).0, self.ue_budget(link)),
        };
        let g_tx = if d.tx_aligned { g_tx } else { 0.0 };
        let g_rx = if d.rx_aligned { self.g_f } else { 0.0 };
        self.rx_power(budget, g_tx, g_rx, d.los, d.shadow_z)
    }

    /// Power of an interfering UE using `scheme` at the receiver of `link`.
    pub fn ue_interference(&self, link: Link, scheme: Scheme, d: &InterfererDraw) -> f64 {
        let g_tx = if d.tx_aligned { self.tx_gain(scheme).0 } else { 0.0 };
        self.rx_power(self.ue_budget(link), g_tx, self.g_f, d.los, d.shadow_z)
    }

    /// Power of the transmitting relay at the access point.
    pub fn relay_interference(&self, d: &InterfererDraw) -> f64 {
        let g_tx = if d.tx_aligned { self.g_f } else { 0.0 };
        self.rx_power(&self.relay_ap, g_tx, self.g_f, true, d.shadow_z)
    }

    /// Interference and additive terms of the denominator, in the order used
    /// by every evaluation path.
    pub fn denominator_terms(
        &self,
        scenario: &InterferenceScenario,
        draws: &ShadowAndLosRealization,
    ) -> (f64, f64) {
        let link = scenario.link;
        let mut sum = 0.0;
        for d in &draws.fd_interferers {
            sum += self.ue_interference(link, Scheme::Fd, d);
        }
        for d in &draws.br_interferers {
            sum += self.ue_interference(link, Scheme::Br, d);
        }
        if let Some(r) = &draws.relay {
            sum += self.relay_interference(r);
        }
        let extra = if link == Link::UeToRelay && scenario.relay_active {
            self.self_interference()
        } else {
            0.0
        };
        (sum, extra)
    }

    /// Draw a fresh realization for `scenario` (used by the physical
    /// simulation mode and by tests).
    pub fn draw_realization<R: Rng + ?Sized>(
        &self,
        scenario: &InterferenceScenario,
        rng: &mut R,
    ) -> ShadowAndLosRealization {
        let (sig_plos, sig_pg_tx) = match scenario.link {
            Link::RelayToAp => (1.0, self.pg_f),
            l => (self.ue_budget(l).p_los, self.tx_gain(scenario.scheme).1),
        };
        let signal = LinkDraw {
            los: rng.random::<f64>() < sig_plos,
            shadow_z: rng.sample(StandardNormal),
            tx_aligned: rng.random::<f64>() < sig_pg_tx,
            rx_aligned: rng.random::<f64>() < self.pg_f,
        };
        let p_i = self.ue_budget(scenario.link).p_los;
        let mut interferer = |scheme: Scheme| InterfererDraw {
            los: rng.random::<f64>() < p_i,
            shadow_z: rng.sample(StandardNormal),
            tx_aligned: rng.random::<f64>() < self.tx_gain(scheme).1,
        };
        let fd_interferers = (0..scenario.n_fd).map(|_| interferer(Scheme::Fd)).collect();
        let br_interferers = (0..scenario.n_br).map(|_| interferer(Scheme::Br)).collect();
        let relay = (scenario.relay_active && scenario.link == Link::UeToAp).then(|| InterfererDraw {
            los: true,
            shadow_z: rng.sample(StandardNormal),
            tx_aligned: rng.random::<f64>() < self.pg_f,
        });
        ShadowAndLosRealization {
            signal,
            fd_interferers,
            br_interferers,
            relay,
        }
    }
}

/// Linear SINR of the intended transmission of `scenario` under `draws`.
pub fn sample_sinr(
    scenario: &InterferenceScenario,
    draws: &ShadowAndLosRealization,
    channel: &Channel,
    n_ues: u32,
) -> Result<f64> {
    scenario.check(n_ues)?;
    let mismatch = |reason: &str| {
        Err(Error::InvalidScenario {
            scenario: *scenario,
            reason: reason.to_string(),
        })
    };
    if draws.fd_interferers.len() != scenario.n_fd as usize
        || draws.br_interferers.len() != scenario.n_br as usize
    {
        return mismatch("interferer draws do not match the interferer counts");
    }
    let wants_relay = scenario.relay_active && scenario.link == Link::UeToAp;
    if draws.relay.is_some() != wants_relay {
        return mismatch("relay interferer draw present iff the relay transmits towards the access point");
    }
    let signal = channel.signal_power(scenario.link, scenario.scheme, &draws.signal);
    let (interference, extra) = channel.denominator_terms(scenario, draws);
    Ok(channel.sinr(signal, interference, extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn los_draw() -> LinkDraw {
        LinkDraw {
            los: true,
            shadow_z: 0.0,
            tx_aligned: true,
            rx_aligned: true,
        }
    }

    #[test]
    fn noise_limited_sinr() {
        let cfg = SceneConfig::default();
        let ch = Channel::new(&cfg).unwrap();
        let sc = InterferenceScenario::new(Link::UeToRelay, Scheme::Fd, 0, 0, false);
        let draws = ShadowAndLosRealization {
            signal: los_draw(),
            fd_interferers: vec![],
            br_interferers: vec![],
            relay: None,
        };
        let got = sample_sinr(&sc, &draws, &ch, cfg.n_ues).unwrap();
        let h = 10f64.powf(-ch.ue_relay.pl_los_db / 10.0);
        let want = ch.p_t * ch.g_f * ch.g_f * h / ch.noise;
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_cancellation_removes_interference() {
        let mut cfg = SceneConfig::default();
        cfg.alpha = 0.0;
        let ch = Channel::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sc = InterferenceScenario::new(Link::UeToAp, Scheme::Br, 3, 4, true);
        let draws = ch.draw_realization(&sc, &mut rng);
        let alone = ShadowAndLosRealization {
            fd_interferers: vec![],
            br_interferers: vec![],
            relay: None,
            ..draws.clone()
        };
        let empty = InterferenceScenario::new(Link::UeToAp, Scheme::Br, 0, 0, false);
        assert_eq!(
            sample_sinr(&sc, &draws, &ch, 10).unwrap(),
            sample_sinr(&empty, &alone, &ch, 10).unwrap()
        );
    }

    #[test]
    fn self_interference_adds_transmit_power() {
        let mut cfg = SceneConfig::default();
        cfg.beta = 1.0;
        let ch = Channel::new(&cfg).unwrap();
        let on = InterferenceScenario::new(Link::UeToRelay, Scheme::Fd, 0, 0, true);
        let draws = ShadowAndLosRealization {
            signal: los_draw(),
            fd_interferers: vec![],
            br_interferers: vec![],
            relay: None,
        };
        let s = ch.signal_power(Link::UeToRelay, Scheme::Fd, &draws.signal);
        let got = sample_sinr(&on, &draws, &ch, 10).unwrap();
        assert!((got - s / (ch.noise + ch.p_t)).abs() <= 1e-12 * got);
    }

    #[test]
    fn denominator_assembled_term_by_term() {
        let cfg = SceneConfig::default();
        let ch = Channel::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sc = InterferenceScenario::new(Link::UeToAp, Scheme::Fd, 2, 1, true);
        let d = ch.draw_realization(&sc, &mut rng);
        let term = |g_tx: f64, aligned: bool, budget: &LinkBudget, los: bool, z: f64| {
            if !aligned {
                return 0.0;
            }
            let pl = if los { budget.pl_los_db } else { budget.pl_nlos_db };
            let sd = if los { 4.0 } else { 7.82 };
            ch.p_t * g_tx * ch.g_f * 10f64.powf(-(pl + sd * z) / 10.0)
        };
        let mut i = 0.0;
        for x in &d.fd_interferers {
            i += term(ch.g_f, x.tx_aligned, &ch.ue_ap, x.los, x.shadow_z);
        }
        for x in &d.br_interferers {
            i += term(ch.g_b, x.tx_aligned, &ch.ue_ap, x.los, x.shadow_z);
        }
        let r = d.relay.unwrap();
        i += term(ch.g_f, r.tx_aligned, &ch.relay_ap, true, r.shadow_z);
        let s = ch.signal_power(Link::UeToAp, Scheme::Fd, &d.signal);
        let got = sample_sinr(&sc, &d, &ch, 10).unwrap();
        let want = s / (ch.noise + cfg.alpha * i);
        assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn mismatched_draws_are_rejected() {
        let cfg = SceneConfig::default();
        let ch = Channel::new(&cfg).unwrap();
        let sc = InterferenceScenario::new(Link::UeToAp, Scheme::Fd, 1, 0, false);
        let draws = ShadowAndLosRealization {
            signal: los_draw(),
            fd_interferers: vec![],
            br_interferers: vec![],
            relay: None,
        };
        assert!(sample_sinr(&sc, &draws, &ch, 10).is_err());
        let too_many = InterferenceScenario::new(Link::UeToAp, Scheme::Fd, 10, 0, false);
        assert!(sample_sinr(&too_many, &draws, &ch, 10).is_err());
    }
}
