//! Geometry, propagation, antenna gains, SINR and decoding probabilities.

mod antenna;
mod propagation;
mod sinr;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::SceneConfig;
use crate::error::{Error, Result};

pub use antenna::{beam_gain, gain_success_prob};
pub use propagation::{
    los_probability, path_loss, shadowing_std_db, umi_los_path_loss, LinkBudget, LinkGeometry,
};
pub use sinr::{sample_sinr, Channel, InterfererDraw, LinkDraw, ShadowAndLosRealization};
pub use table::{
    build_success_table, build_success_table_for, success_probability, SuccessTable,
    TableMetadata, TABLE_FORMAT_VERSION,
};

/// Receiver/transmitter pair of a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    UeToAp,
    UeToRelay,
    RelayToAp,
}

impl Link {
    pub const ALL: [Link; 3] = [Link::UeToAp, Link::UeToRelay, Link::RelayToAp];

    pub fn as_str(self) -> &'static str {
        match self {
            Link::UeToAp => "ue_to_ap",
            Link::UeToRelay => "ue_to_relay",
            Link::RelayToAp => "relay_to_ap",
        }
    }

    pub fn parse(s: &str) -> Option<Link> {
        Link::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

/// Beam scheme used by the intended transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "FD")]
    Fd,
    #[serde(rename = "BR")]
    Br,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Fd, Scheme::Br];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Fd => "FD",
            Scheme::Br => "BR",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

/// One conditioning event for a decoding probability: who transmits to
/// whom, with which scheme, and how many UEs of each scheme interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InterferenceScenario {
    pub link: Link,
    pub scheme: Scheme,
    pub n_fd: u32,
    pub n_br: u32,
    pub relay_active: bool,
}

impl InterferenceScenario {
    pub fn new(link: Link, scheme: Scheme, n_fd: u32, n_br: u32, relay_active: bool) -> Self {
        Self {
            link,
            scheme,
            n_fd,
            n_br,
            relay_active,
        }
    }

    /// Check the structural invariants against a network of `n_ues` UEs.
    pub fn check(&self, n_ues: u32) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidScenario {
                scenario: *self,
                reason,
            })
        };
        let total = self.n_fd + self.n_br;
        match self.link {
            Link::UeToAp | Link::UeToRelay => {
                if total + 1 > n_ues {
                    return fail(format!(
                        "{total} interferers plus the transmitter exceed {n_ues} UEs"
                    ));
                }
            }
            Link::RelayToAp => {
                if self.relay_active {
                    return fail("relay cannot interfere with itself".into());
                }
                if self.scheme != Scheme::Fd {
                    return fail("the relay always transmits with a directional beam".into());
                }
                if total > n_ues {
                    return fail(format!("{total} interferers exceed {n_ues} UEs"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for InterferenceScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, n_fd={}, n_br={}, relay_active={})",
            self.link.as_str(),
            self.scheme.as_str(),
            self.n_fd,
            self.n_br,
            self.relay_active
        )
    }
}

/// Planar distances between the three node types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_ud: f64,
    pub d_ur: f64,
    pub d_rd: f64,
}

pub(crate) fn relay_ap_distance(d_ud: f64, d_ur: f64, theta_rd: f64) -> f64 {
    (d_ud * d_ud + d_ur * d_ur - 2.0 * d_ud * d_ur * theta_rd.cos())
        .max(0.0)
        .sqrt()
}

/// Relay-to-access-point distance from the UE-centred triangle.
pub fn derive_geometry(cfg: &SceneConfig) -> Result<Geometry> {
    if !(cfg.theta_rd > 0.0 && cfg.theta_rd <= std::f64::consts::PI) {
        return Err(Error::config(
            "theta_rd",
            format!("must lie in (0, pi], got {}", cfg.theta_rd),
        ));
    }
    let d_rd = relay_ap_distance(cfg.d_ud, cfg.d_ur, cfg.theta_rd);
    Ok(Geometry {
        d_ud: cfg.d_ud,
        d_ur: cfg.d_ur,
        d_rd,
    })
}

impl Geometry {
    /// UE to access point: the access point is mounted at `h_ap`.
    pub fn ue_ap(&self, cfg: &SceneConfig) -> LinkGeometry {
        LinkGeometry::new(self.d_ud, cfg.h_ap, cfg.h_ue)
    }

    /// UE to relay: the relay is a ground node at UE height.
    pub fn ue_relay(&self, cfg: &SceneConfig) -> LinkGeometry {
        LinkGeometry::new(self.d_ur, cfg.h_ue, cfg.h_ue)
    }

    pub fn relay_ap(&self, cfg: &SceneConfig) -> LinkGeometry {
        LinkGeometry::new(self.d_rd, cfg.h_ap, cfg.h_ue)
    }
}
