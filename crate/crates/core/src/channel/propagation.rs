//! UMi street-canyon path loss, LOS probability and shadowing.

use serde::{Deserialize, Serialize};

const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Planar/3D distance and end-point heights of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d2d: f64,
    pub d3d: f64,
    /// Height of the higher end (access point, or the relay on ground links).
    pub h_high: f64,
    pub h_low: f64,
}

impl LinkGeometry {
    pub fn new(d2d: f64, h_high: f64, h_low: f64) -> Self {
        let dh = h_high - h_low;
        Self {
            d2d,
            d3d: (d2d * d2d + dh * dh).sqrt(),
            h_high,
            h_low,
        }
    }

    /// Effective breakpoint distance with a 1 m environment height.
    pub fn breakpoint(&self, fc_ghz: f64) -> f64 {
        let hb = (self.h_high - 1.0).max(0.0);
        let hu = (self.h_low - 1.0).max(0.0);
        4.0 * hb * hu * fc_ghz * 1e9 / SPEED_OF_LIGHT
    }
}

/// LOS path loss below the breakpoint, dB.
pub fn umi_los_path_loss(d3d: f64, fc_ghz: f64) -> f64 {
    32.4 + 21.0 * d3d.log10() + 20.0 * fc_ghz.log10()
}

fn los_with_breakpoint(link: &LinkGeometry, fc_ghz: f64) -> f64 {
    let bp = link.breakpoint(fc_ghz);
    if link.d2d <= bp {
        umi_los_path_loss(link.d3d, fc_ghz)
    } else {
        let dh = link.h_high - link.h_low;
        32.4 + 40.0 * link.d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.5 * (bp * bp + dh * dh).log10()
    }
}

/// Mean path loss in dB (shadowing excluded).
pub fn path_loss(link: &LinkGeometry, los: bool, fc_ghz: f64) -> f64 {
    let pl_los = los_with_breakpoint(link, fc_ghz);
    if los {
        pl_los
    } else {
        let nlos = 22.4 + 35.3 * link.d3d.log10() + 21.3 * fc_ghz.log10()
            - 0.3 * (link.h_low - 1.5);
        pl_los.max(nlos)
    }
}

/// Shadowing standard deviation in dB.
pub fn shadowing_std_db(los: bool) -> f64 {
    if los {
        4.0
    } else {
        7.82
    }
}

/// Probability that a ground link of planar length `d2d` is LOS.
pub fn los_probability(d2d: f64) -> f64 {
    if d2d <= 18.0 {
        1.0
    } else {
        18.0 / d2d + (-d2d / 36.0).exp() * (1.0 - 18.0 / d2d)
    }
}

/// Everything needed to draw the received power on one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub pl_los_db: f64,
    pub pl_nlos_db: f64,
    pub p_los: f64,
}

impl LinkBudget {
    pub fn new(link: &LinkGeometry, fc_ghz: f64, p_los: f64) -> Self {
        Self {
            pl_los_db: path_loss(link, true, fc_ghz),
            pl_nlos_db: path_loss(link, false, fc_ghz),
            p_los,
        }
    }

    /// Linear channel gain for a LOS state and a standard-normal draw.
    #[inline]
    pub fn attenuation(&self, los: bool, z: f64) -> f64 {
        let (pl, sd) = if los {
            (self.pl_los_db, shadowing_std_db(true))
        } else {
            (self.pl_nlos_db, shadowing_std_db(false))
        };
        10f64.powf(-(pl + sd * z) / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance_los() {
        let pl = umi_los_path_loss(1.0, 30.0);
        assert!((pl - (32.4 + 20.0 * 30f64.log10())).abs() < 1e-12);
        assert!((pl - 61.94).abs() < 0.01);
    }

    #[test]
    fn los_slope_is_21_db_per_decade() {
        let a = umi_los_path_loss(20.0, 30.0);
        let b = umi_los_path_loss(40.0, 30.0);
        assert!((b - a - 21.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn nlos_dominates_los() {
        for d in [5.0, 30.0, 80.0, 300.0, 2000.0] {
            let g = LinkGeometry::new(d, 10.0, 1.5);
            assert!(path_loss(&g, false, 30.0) >= path_loss(&g, true, 30.0));
        }
    }

    #[test]
    fn breakpoint_branch_is_continuous() {
        let probe = LinkGeometry::new(1.0, 1.5, 1.5);
        let bp = probe.breakpoint(30.0);
        assert!((bp - 100.0).abs() < 1e-9);
        let below = path_loss(&LinkGeometry::new(bp - 1e-9, 1.5, 1.5), true, 30.0);
        let above = path_loss(&LinkGeometry::new(bp + 1e-9, 1.5, 1.5), true, 30.0);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn los_probability_shape() {
        assert_eq!(los_probability(10.0), 1.0);
        assert_eq!(los_probability(18.0), 1.0);
        let mut prev = 1.0;
        for d in (19..2000).step_by(7) {
            let p = los_probability(d as f64);
            assert!(p <= prev && p > 0.0);
            prev = p;
        }
        assert!(los_probability(1e9) < 1e-7);
    }
}
