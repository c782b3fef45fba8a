//! Flat CSV rows shared by analysis, simulation and sweeps.

use serde::{Deserialize, Serialize};

use crate::config::SceneConfig;
use crate::metrics::Analysis;
use crate::sim::SimResult;

/// Column names of the parameter tuple carried by every row.
pub const PARAM_COLUMNS: &[&str] = &[
    "n_ues",
    "d_ud",
    "d_ur",
    "theta_rd_deg",
    "theta_bw_f_deg",
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
];

/// Result columns after the parameter tuple.
pub const RESULT_COLUMNS: &[&str] = &[
    "source",
    "seed",
    "slots",
    "regime",
    "q_tx",
    "lambda0",
    "lambda1",
    "lambda_r",
    "a_r",
    "b_r",
    "mu_r",
    "q_rmin",
    "p_empty",
    "q_bar",
    "d_q",
    "d_rel",
    "t_aggregate",
    "t_ud_f",
    "t_ud_b",
    "t_ur_f",
    "t_ur_b",
    "t_u",
    "d_total",
    "d_ue_tx",
    "d_relay_tx",
    "d_queueing",
    "d_alignment",
    "error",
];

pub fn header() -> Vec<String> {
    PARAM_COLUMNS.iter().chain(RESULT_COLUMNS).map(|s| s.to_string()).collect()
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One CSV row: the full parameter tuple plus results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row(pub Vec<String>);

impl Row {
    fn params(cfg: &SceneConfig) -> Vec<String> {
        PARAM_COLUMNS
            .iter()
            .map(|name| match *name {
                "channel_seed" => cfg.channel_seed.to_string(),
                "n_ues" => cfg.n_ues.to_string(),
                "n_shadow_samples" => cfg.n_shadow_samples.to_string(),
                other => num(cfg.get_param(other).expect("known column")),
            })
            .collect()
    }

    pub fn analysis(cfg: &SceneConfig, a: &Analysis) -> Self {
        let q = &a.queue;
        let p = &a.perf;
        let b = &p.d_breakdown;
        let mut v = Self::params(cfg);
        v.extend([
            "analysis".to_string(),
            String::new(),
            String::new(),
            p.regime.as_str().to_string(),
            num(q.q_tx),
            num(q.lambda0),
            num(q.lambda1),
            opt(q.lambda_r),
            num(q.a_r),
            num(q.b_r),
            num(q.mu_r),
            opt(q.q_rmin),
            opt(q.p_empty),
            opt(q.q_bar),
            opt(q.d_q),
            opt(q.d_rel),
            num(p.t_aggregate),
            num(p.t_ud_f),
            num(p.t_ud_b),
            num(p.t_ur_f),
            num(p.t_ur_b),
            num(p.t_u),
            num(p.d_total),
            num(b.ue_tx),
            num(b.relay_tx),
            num(b.queueing),
            num(b.alignment),
            String::new(),
        ]);
        Row(v)
    }

    pub fn simulation(cfg: &SceneConfig, s: &SimResult) -> Self {
        let b = &s.d_breakdown;
        let mut v = Self::params(cfg);
        v.extend([
            "sim".to_string(),
            s.seed.to_string(),
            s.slots.to_string(),
            String::new(),
            num(s.q_tx_empirical),
            String::new(),
            String::new(),
            num(s.lambda_empirical),
            String::new(),
            String::new(),
            num(s.mu_empirical),
            String::new(),
            num(s.p_empty_empirical),
            num(s.q_bar_empirical),
            num(s.relay_wait_empirical),
            num(s.relay_sojourn_empirical),
            num(s.t_empirical),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            num(s.d_empirical),
            num(b.ue_tx),
            num(b.relay_tx),
            num(b.queueing),
            num(b.alignment),
            String::new(),
        ]);
        Row(v)
    }

    pub fn failure(cfg: &SceneConfig, source: &str, message: &str) -> Self {
        let mut v = Self::params(cfg);
        v.push(source.to_string());
        v.resize(PARAM_COLUMNS.len() + RESULT_COLUMNS.len() - 1, String::new());
        v.push(message.replace(['\n', '\r'], " "));
        Row(v)
    }

    /// Value of a named column.
    pub fn get(&self, column: &str) -> Option<&str> {
        let idx = PARAM_COLUMNS.iter().chain(RESULT_COLUMNS).position(|c| *c == column)?;
        self.0.get(idx).map(String::as_str)
    }
}
