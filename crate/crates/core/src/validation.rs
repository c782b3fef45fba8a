//! Cross-checks of the analytical pipeline against independent references.
//!
//! Each check compares a compressed computation with a brute-force or
//! numerically independent one and reports the largest discrepancy.

use serde::{Deserialize, Serialize};

use crate::channel::SuccessTable;
use crate::config::SceneConfig;
use crate::error::Result;
use crate::metrics::{self, packet_delay, packet_delay_recursive, RelayDelay};
use crate::oracle;
use crate::queueing::{actual_tx_prob, stationary_numeric, QueueReport, RelayLaw};

/// Tolerance for comparisons against exhaustive enumeration.
pub const ENUMERATION_TOL: f64 = 1e-12;
/// Relative tolerance between closed forms and the numeric stationary law.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Relative tolerance between the closed-form and recursive delay.
pub const DELAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub n_ues: u32,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, n_ues: u32, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            n_ues,
            error,
            tolerance,
            passed: error <= tolerance,
            detail: String::new(),
        }
    }

    fn failed(name: &str, n_ues: u32, detail: String) -> Self {
        Self {
            name: name.to_string(),
            n_ues,
            error: f64::NAN,
            tolerance: 0.0,
            passed: false,
            detail,
        }
    }

    fn skipped(name: &str, n_ues: u32, detail: &str) -> Self {
        Self {
            name: name.to_string(),
            n_ues,
            error: 0.0,
            tolerance: 0.0,
            passed: true,
            detail: detail.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300).max(a.abs()).max(1.0e-12)
}

fn run_checks(cfg: &SceneConfig, table: &SuccessTable, n: u32, out: &mut Vec<Check>) -> Result<()> {
    let mut cfg = cfg.clone();
    cfg.n_ues = n;
    cfg.alignment = None;
    let mix = cfg.mix();
    let q_tx = actual_tx_prob(&mix);
    let law = RelayLaw::compute(table, &mix, n, q_tx)?;
    let (queue, kernel) = QueueReport::from_law(&law)?;

    let reference = oracle::enumerated_kernel(table, &mix, n)?;
    let err = max_abs_diff(&kernel.p0, &reference.p0).max(max_abs_diff(&kernel.p1, &reference.p1));
    out.push(Check::new("kernel_vs_enumeration", n, err, ENUMERATION_TOL));

    let (l0, a_r, b_r) = oracle::relay_moments(table, &mix, n)?;
    let err = (queue.lambda0 - l0).abs().max((queue.a_r - a_r).abs()).max((queue.b_r - b_r).abs());
    out.push(Check::new("relay_rates_vs_enumeration", n, err, ENUMERATION_TOL));

    let weight = mix.q_r * queue.p_nonempty();
    let comps = metrics::throughput_components(table, &mix, n, q_tx, weight)?;
    let reference = oracle::throughput_components(table, &mix, n, weight)?;
    let err = max_abs_diff(&[comps.ud_f, comps.ud_b, comps.ur_f, comps.ur_b], &reference);
    out.push(Check::new("components_vs_enumeration", n, err, ENUMERATION_TOL));

    let mut row_check = Check::new("kernel_rows", n, 0.0, ENUMERATION_TOL);
    if let Err(e) = kernel.check(ENUMERATION_TOL) {
        row_check.passed = false;
        row_check.detail = e;
    }
    out.push(row_check);

    let drift_err = (kernel.drift() - queue.drift()).abs();
    out.push(Check::new("drift_identity", n, drift_err, ENUMERATION_TOL));

    if queue.stable && queue.lambda0 > 0.0 {
        match stationary_numeric(&kernel) {
            Ok(dist) => {
                let err = rel(queue.p_empty.unwrap(), dist.p_empty()).max(rel(queue.q_bar.unwrap(), dist.mean()));
                out.push(Check::new("closed_form_vs_stationary", n, err, STATIONARY_TOL));
            }
            Err(e) => out.push(Check::failed("closed_form_vs_stationary", n, e.to_string())),
        }
    } else {
        out.push(Check::skipped("closed_form_vs_stationary", n, "queue unstable or idle"));
    }

    match RelayDelay::from_queue(&queue) {
        Some(relay) if mix.q_u * comps.per_user(&mix) > 0.0 => {
            let (closed, _) = packet_delay(&comps, &mix, Some(relay));
            match packet_delay_recursive(&comps, &mix, relay.total()) {
                Some((_, recursive)) => out.push(Check::new("delay_vs_recursion", n, rel(closed, recursive), DELAY_TOL)),
                None => out.push(Check::failed("delay_vs_recursion", n, "singular recursion".into())),
            }
        }
        _ => out.push(Check::skipped("delay_vs_recursion", n, "delay is infinite")),
    }
    Ok(())
}

/// Validate the pipeline for every network size up to
/// `min(cfg.n_ues, oracle::MAX_ENUMERATED_UES)`.
pub fn validate(cfg: &SceneConfig, table: &SuccessTable) -> Result<ValidationReport> {
    cfg.validate()?;
    let top = cfg.n_ues.min(oracle::MAX_ENUMERATED_UES);
    table.check_covers(top)?;
    let mut checks = Vec::new();
    for n in 1..=top {
        if let Err(e) = run_checks(cfg, table, n, &mut checks) {
            checks.push(Check::failed("pipeline", n, e.to_string()));
        }
    }
    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Link, Scheme};

    fn synthetic(n: u32) -> SuccessTable {
        SuccessTable::from_fn(n, |sc| {
            let base = match (sc.link, sc.scheme) {
                (Link::UeToAp, Scheme::Fd) => 0.7,
                (Link::UeToAp, Scheme::Br) => 0.45,
                (Link::UeToRelay, Scheme::Fd) => 0.9,
                (Link::UeToRelay, Scheme::Br) => 0.65,
                (Link::RelayToAp, _) => 0.9,
            };
            base * 0.85f64.powi((sc.n_fd + 2 * sc.n_br) as i32) * if sc.relay_active { 0.9 } else { 1.0 }
        })
    }

    #[test]
    fn synthetic_table_passes() {
        let cfg = SceneConfig {
            n_ues: 3,
            q_u: 0.2,
            q_r: 0.9,
            d_a: 2.0,
            ..SceneConfig::default()
        };
        let report = validate(&cfg, &synthetic(3)).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
        assert_eq!(report.checks.len(), 3 * 7);
    }

    #[test]
    fn missing_coverage_is_an_error() {
        let cfg = SceneConfig {
            n_ues: 4,
            ..SceneConfig::default()
        };
        assert!(validate(&cfg, &synthetic(2)).is_err());
    }
}
