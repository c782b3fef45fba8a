//! Sectored antenna gains and the pointing-error model.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erf;

/// Main-lobe gain of an ideal sectored antenna.
pub fn beam_gain(theta_bw: f64) -> f64 {
    2.0 * PI / theta_bw
}

/// Probability that a truncated-Gaussian pointing error with standard
/// deviation `sigma_e` (radians) stays inside the main lobe.
pub fn gain_success_prob(theta_bw: f64, sigma_e: f64) -> f64 {
    if sigma_e <= 0.0 || theta_bw >= PI {
        return 1.0;
    }
    let s = SQRT_2 * sigma_e;
    (erf(theta_bw / s) / erf(PI / s)).min(1.0)
}
