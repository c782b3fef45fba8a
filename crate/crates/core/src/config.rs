//! Scene configuration: geometry, radio, antenna and protocol parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the beam-search procedure used to derive per-scheme
/// alignment durations from beamwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookAlignment {
    /// Pilot symbols per slot (slot duration over pilot duration).
    pub m_pilots: f64,
    /// Beam directions probed in parallel.
    pub l_dirs: f64,
    /// Access-point (and relay) beamwidth used during the search, radians.
    pub theta_bw_ap: f64,
}

impl Default for CodebookAlignment {
    fn default() -> Self {
        Self {
            m_pilots: 100.0,
            l_dirs: 16.0,
            theta_bw_ap: 5f64.to_radians(),
        }
    }
}

/// Full description of one network operating point.
///
/// Angles are stored in radians. Use [`SceneConfig::set_param`] with a
/// `_deg` suffix to set them in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_ues: u32,
    pub d_ud: f64,
    pub d_ur: f64,
    pub theta_rd: f64,
    pub theta_bw_f: f64,
    /// Broadcast beamwidth; `None` means "cover both receivers", i.e.
    /// `max(theta_rd, theta_bw_f)`.
    pub theta_bw_b: Option<f64>,
    pub fc_ghz: f64,
    pub h_ap: f64,
    pub h_ue: f64,
    pub p_t_dbm: f64,
    pub p_n_dbm: f64,
    pub gamma_db: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Standard deviation of the beam pointing error, degrees.
    pub sigma_e_deg: f64,
    pub q_u: f64,
    pub q_uf: f64,
    pub q_ur: f64,
    pub q_r: f64,
    pub d_a: f64,
    /// When set, per-scheme alignment durations are derived from the
    /// beamwidths and `d_a` is ignored by the delay model.
    pub alignment: Option<CodebookAlignment>,
    pub n_shadow_samples: u32,
    pub channel_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_ues: 10,
            d_ud: 50.0,
            d_ur: 30.0,
            theta_rd: 30f64.to_radians(),
            theta_bw_f: 5f64.to_radians(),
            theta_bw_b: None,
            fc_ghz: 30.0,
            h_ap: 10.0,
            h_ue: 1.5,
            p_t_dbm: 24.0,
            p_n_dbm: -80.0,
            gamma_db: 10.0,
            alpha: 0.1,
            beta: 0.0,
            sigma_e_deg: 0.0,
            q_u: 0.1,
            q_uf: 0.5,
            q_ur: 0.5,
            q_r: 1.0,
            d_a: 0.0,
            alignment: None,
            n_shadow_samples: 100_000,
            channel_seed: 0x6d6d_7265_6c61_7931,
        }
    }
}

/// Names accepted by [`SceneConfig::set_param`] and sweep axes.
pub const PARAM_NAMES: &[&str] = &[
    "n_ues",
    "d_ud",
    "d_ur",
    "theta_rd",
    "theta_rd_deg",
    "theta_bw_f",
    "theta_bw_f_deg",
    "theta_bw_b",
    "theta_bw_b_deg",
    "fc_ghz",
    "h_ap",
    "h_ue",
    "p_t_dbm",
    "p_n_dbm",
    "gamma_db",
    "alpha",
    "beta",
    "sigma_e_deg",
    "q_u",
    "q_uf",
    "q_ur",
    "q_r",
    "d_a",
    "n_shadow_samples",
    "channel_seed",
    "m_pilots",
    "l_dirs",
    "theta_bw_ap",
    "theta_bw_ap_deg",
];

fn check_prob(field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(field, format!("must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(field, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_finite(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::config(field, format!("must be finite, got {v}")));
    }
    Ok(())
}

impl SceneConfig {
    /// Effective broadcast beamwidth in radians.
    pub fn theta_b(&self) -> f64 {
        self.theta_bw_b
            .unwrap_or_else(|| self.theta_rd.max(self.theta_bw_f))
    }

    pub fn mix(&self) -> StrategyMix {
        StrategyMix {
            q_u: self.q_u,
            q_uf: self.q_uf,
            q_ur: self.q_ur,
            q_r: self.q_r,
            d_a: self.d_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ues == 0 {
            return Err(Error::config("n_ues", "must be at least 1"));
        }
        check_positive("d_ud", self.d_ud)?;
        check_positive("d_ur", self.d_ur)?;
        if !(self.theta_rd > 0.0 && self.theta_rd <= PI) {
            return Err(Error::config(
                "theta_rd",
                format!("must lie in (0, pi], got {}", self.theta_rd),
            ));
        }
        if !(self.theta_bw_f > 0.0 && self.theta_bw_f <= 2.0 * PI) {
            return Err(Error::config(
                "theta_bw_f",
                format!("must lie in (0, 2pi], got {}", self.theta_bw_f),
            ));
        }
        if let Some(b) = self.theta_bw_b {
            if !(b >= self.theta_bw_f && b <= 2.0 * PI) {
                return Err(Error::config(
                    "theta_bw_b",
                    format!("must lie in [theta_bw_f, 2pi], got {b}"),
                ));
            }
        }
        check_positive("fc_ghz", self.fc_ghz)?;
        check_positive("h_ap", self.h_ap)?;
        check_positive("h_ue", self.h_ue)?;
        if self.h_ap < self.h_ue {
            return Err(Error::config("h_ap", "must not be below h_ue"));
        }
        check_finite("p_t_dbm", self.p_t_dbm)?;
        check_finite("p_n_dbm", self.p_n_dbm)?;
        if self.gamma_db.is_nan() {
            return Err(Error::config("gamma_db", "must not be NaN"));
        }
        check_prob("alpha", self.alpha)?;
        check_prob("beta", self.beta)?;
        if !(self.sigma_e_deg >= 0.0 && self.sigma_e_deg.is_finite()) {
            return Err(Error::config("sigma_e_deg", "must be non-negative and finite"));
        }
        self.mix().validate()?;
        if let Some(a) = &self.alignment {
            check_positive("m_pilots", a.m_pilots)?;
            check_positive("l_dirs", a.l_dirs)?;
            if !(a.theta_bw_ap > 0.0 && a.theta_bw_ap <= 2.0 * PI) {
                return Err(Error::config("theta_bw_ap", "must lie in (0, 2pi]"));
            }
        }
        if self.n_shadow_samples == 0 {
            return Err(Error::config("n_shadow_samples", "must be at least 1"));
        }
        let d_rd = crate::channel::relay_ap_distance(self.d_ud, self.d_ur, self.theta_rd);
        if d_rd.is_nan() || d_rd <= 0.0 {
            return Err(Error::config(
                "theta_rd",
                "relay coincides with the access point",
            ));
        }
        Ok(())
    }

    /// Set a scalar parameter by name. Angle fields accept a `_deg` suffix.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<u32> {
            if v.fract() != 0.0 || v < 0.0 || v > f64::from(u32::MAX) {
                return Err(Error::config(name, format!("expects a non-negative integer, got {v}")));
            }
            Ok(v as u32)
        };
        match name {
            "n_ues" => self.n_ues = as_count(value)?,
            "d_ud" => self.d_ud = value,
            "d_ur" => self.d_ur = value,
            "theta_rd" => self.theta_rd = value,
            "theta_rd_deg" => self.theta_rd = value.to_radians(),
            "theta_bw_f" => self.theta_bw_f = value,
            "theta_bw_f_deg" => self.theta_bw_f = value.to_radians(),
            "theta_bw_b" => self.theta_bw_b = Some(value),
            "theta_bw_b_deg" => self.theta_bw_b = Some(value.to_radians()),
            "fc_ghz" => self.fc_ghz = value,
            "h_ap" => self.h_ap = value,
            "h_ue" => self.h_ue = value,
            "p_t_dbm" => self.p_t_dbm = value,
            "p_n_dbm" => self.p_n_dbm = value,
            "gamma_db" => self.gamma_db = value,
            "alpha" => self.alpha = value,
            "beta" => self.beta = value,
            "sigma_e_deg" => self.sigma_e_deg = value,
            "q_u" => self.q_u = value,
            "q_uf" => self.q_uf = value,
            "q_ur" => self.q_ur = value,
            "q_r" => self.q_r = value,
            "d_a" => self.d_a = value,
            "n_shadow_samples" => self.n_shadow_samples = as_count(value)?,
            "channel_seed" => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::config(name, "expects a non-negative integer"));
                }
                self.channel_seed = value as u64
            }
            "m_pilots" => self.alignment.get_or_insert_with(Default::default).m_pilots = value,
            "l_dirs" => self.alignment.get_or_insert_with(Default::default).l_dirs = value,
            "theta_bw_ap" => self.alignment.get_or_insert_with(Default::default).theta_bw_ap = value,
            "theta_bw_ap_deg" => {
                self.alignment.get_or_insert_with(Default::default).theta_bw_ap = value.to_radians()
            }
            other => {
                return Err(Error::config(other, "is not a known parameter"));
            }
        }
        Ok(())
    }

    /// Read a scalar parameter by name (same names as [`Self::set_param`]).
    pub fn get_param(&self, name: &str) -> Result<f64> {
        let align = self.alignment.unwrap_or_default();
        Ok(match name {
            "n_ues" => f64::from(self.n_ues),
            "d_ud" => self.d_ud,
            "d_ur" => self.d_ur,
            "theta_rd" => self.theta_rd,
            "theta_rd_deg" => self.theta_rd.to_degrees(),
            "theta_bw_f" => self.theta_bw_f,
            "theta_bw_f_deg" => self.theta_bw_f.to_degrees(),
            "theta_bw_b" => self.theta_b(),
            "theta_bw_b_deg" => self.theta_b().to_degrees(),
            "fc_ghz" => self.fc_ghz,
            "h_ap" => self.h_ap,
            "h_ue" => self.h_ue,
            "p_t_dbm" => self.p_t_dbm,
            "p_n_dbm" => self.p_n_dbm,
            "gamma_db" => self.gamma_db,
            "alpha" => self.alpha,
            "beta" => self.beta,
            "sigma_e_deg" => self.sigma_e_deg,
            "q_u" => self.q_u,
            "q_uf" => self.q_uf,
            "q_ur" => self.q_ur,
            "q_r" => self.q_r,
            "d_a" => self.d_a,
            "n_shadow_samples" => f64::from(self.n_shadow_samples),
            "channel_seed" => self.channel_seed as f64,
            "m_pilots" => align.m_pilots,
            "l_dirs" => align.l_dirs,
            "theta_bw_ap" => align.theta_bw_ap,
            "theta_bw_ap_deg" => align.theta_bw_ap.to_degrees(),
            other => return Err(Error::config(other, "is not a known parameter")),
        })
    }

    /// Parse `key=value` and apply it.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        if key == "theta_bw_b" && (value == "none" || value == "auto") {
            self.theta_bw_b = None;
            return Ok(());
        }
        if key == "alignment" && value == "none" {
            self.alignment = None;
            return Ok(());
        }
        if key == "channel_seed" {
            let parsed = match value.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => value.parse(),
            };
            self.channel_seed = parsed.map_err(|_| Error::config(key, format!("cannot parse `{value}` as a seed")))?;
            return Ok(());
        }
        let v: f64 = value
            .parse()
            .map_err(|_| Error::config(key, format!("cannot parse `{value}` as a number")))?;
        self.set_param(key, v)
    }

    /// Projection of the configuration that determines the success table.
    /// Protocol probabilities and the UE count are deliberately excluded:
    /// the table does not depend on them.
    pub fn channel_key(&self) -> ChannelKey {
        ChannelKey {
            d_ud: self.d_ud,
            d_ur: self.d_ur,
            theta_rd: self.theta_rd,
            theta_bw_f: self.theta_bw_f,
            theta_bw_b: self.theta_b(),
            fc_ghz: self.fc_ghz,
            h_ap: self.h_ap,
            h_ue: self.h_ue,
            p_t_dbm: self.p_t_dbm,
            p_n_dbm: self.p_n_dbm,
            gamma_db: self.gamma_db,
            alpha: self.alpha,
            beta: self.beta,
            sigma_e_deg: self.sigma_e_deg,
            n_shadow_samples: self.n_shadow_samples,
            channel_seed: self.channel_seed,
        }
    }
}

/// Channel-relevant subset of [`SceneConfig`], used as the table cache key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelKey {
    pub d_ud: f64,
    pub d_ur: f64,
    pub theta_rd: f64,
    pub theta_bw_f: f64,
    pub theta_bw_b: f64,
    pub fc_ghz: f64,
    pub h_ap: f64,
    pub h_ue: f64,
    pub p_t_dbm: f64,
    pub p_n_dbm: f64,
    pub gamma_db: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_e_deg: f64,
    pub n_shadow_samples: u32,
    pub channel_seed: u64,
}

impl ChannelKey {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("channel key serializes");
        let mut h = Sha256::new();
        h.update(crate::channel::TABLE_FORMAT_VERSION.to_le_bytes());
        h.update(json.as_bytes());
        hex::encode(h.finalize())
    }

    /// Bit-exact identity usable as a map key.
    pub fn bits(&self) -> Vec<u64> {
        vec![
            self.d_ud.to_bits(),
            self.d_ur.to_bits(),
            self.theta_rd.to_bits(),
            self.theta_bw_f.to_bits(),
            self.theta_bw_b.to_bits(),
            self.fc_ghz.to_bits(),
            self.h_ap.to_bits(),
            self.h_ue.to_bits(),
            self.p_t_dbm.to_bits(),
            self.p_n_dbm.to_bits(),
            self.gamma_db.to_bits(),
            self.alpha.to_bits(),
            self.beta.to_bits(),
            self.sigma_e_deg.to_bits(),
            u64::from(self.n_shadow_samples),
            self.channel_seed,
        ]
    }
}

/// Transmission strategy of a UE in one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Fully directional towards the access point.
    DirectFd,
    /// Fully directional towards the relay.
    RelayFd,
    /// Broadcast beam covering both receivers.
    Broadcast,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::DirectFd, Strategy::RelayFd, Strategy::Broadcast];
}

/// Protocol probabilities shared by all UEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyMix {
    pub q_u: f64,
    pub q_uf: f64,
    pub q_ur: f64,
    pub q_r: f64,
    pub d_a: f64,
}

impl StrategyMix {
    pub fn validate(&self) -> Result<()> {
        check_prob("q_u", self.q_u)?;
        check_prob("q_uf", self.q_uf)?;
        check_prob("q_ur", self.q_ur)?;
        check_prob("q_r", self.q_r)?;
        if !(self.d_a >= 0.0 && self.d_a.is_finite()) {
            return Err(Error::config("d_a", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn q_ub(&self) -> f64 {
        1.0 - self.q_uf
    }

    pub fn q_um(&self) -> f64 {
        1.0 - self.q_ur
    }

    /// Probability that an attempt uses `s`.
    pub fn prob(&self, s: Strategy) -> f64 {
        match s {
            Strategy::DirectFd => self.q_uf * self.q_um(),
            Strategy::RelayFd => self.q_uf * self.q_ur,
            Strategy::Broadcast => self.q_ub(),
        }
    }

    pub fn q_fm(&self) -> f64 {
        self.prob(Strategy::DirectFd)
    }

    pub fn q_fr(&self) -> f64 {
        self.prob(Strategy::RelayFd)
    }

    pub fn q_b(&self) -> f64 {
        self.prob(Strategy::Broadcast)
    }
}
