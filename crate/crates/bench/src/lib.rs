//! Shared fixtures for the benchmarks.

use mmrelay::{Link, SceneConfig, Scheme, SuccessTable};

/// A smooth synthetic table so benchmarks do not pay for channel sampling.
pub fn synthetic_table(n_ues: u32) -> SuccessTable {
    SuccessTable::from_fn(n_ues, |sc| {
        let base = match (sc.link, sc.scheme) {
            (Link::UeToAp, Scheme::Fd) => 0.8,
            (Link::UeToAp, Scheme::Br) => 0.5,
            (Link::UeToRelay, Scheme::Fd) => 0.9,
            (Link::UeToRelay, Scheme::Br) => 0.7,
            (Link::RelayToAp, _) => 0.95,
        };
        base * 0.92f64.powi((sc.n_fd + 2 * sc.n_br) as i32) * if sc.relay_active { 0.9 } else { 1.0 }
    })
}

/// Default scene with `n_ues` UEs and a small sample budget.
pub fn scene(n_ues: u32, samples: u32) -> SceneConfig {
    SceneConfig {
        n_ues,
        n_shadow_samples: samples,
        ..SceneConfig::default()
    }
}
