//! Property tests over randomized tables and strategy mixes.

use mmrelay::channel::gain_success_prob;
use mmrelay::metrics::{packet_delay, Components, RelayDelay};
use mmrelay::oracle;
use mmrelay::queueing::{actual_tx_prob, repeat_probability, stationary_numeric, QueueReport, RelayLaw};
use mmrelay::{analyze, SceneConfig, StrategyMix, SuccessTable};
use proptest::prelude::*;

fn mix_strategy() -> impl Strategy<Value = StrategyMix> {
    (0.01f64..1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.05f64..=1.0, 0.0f64..8.0).prop_map(|(q_u, q_uf, q_ur, q_r, d_a)| {
        StrategyMix {
            q_u,
            q_uf,
            q_ur,
            q_r,
            d_a,
        }
    })
}

/// Table with entries drawn from a seeded generator, shrinking interference.
fn table(n: u32, seed: u64, decay: f64) -> SuccessTable {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    SuccessTable::from_fn(n, |sc| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        u * decay.powi((sc.n_fd + sc.n_br) as i32)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmit_probability_bounds(m in mix_strategy()) {
        let p_rep = repeat_probability(&m);
        prop_assert!((1.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&p_rep));
        let q = actual_tx_prob(&m);
        prop_assert!(q > 0.0 && q <= m.q_u + 1e-15);
        if m.d_a == 0.0 {
            prop_assert_eq!(q, m.q_u);
        }
    }

    #[test]
    fn kernel_is_a_distribution(m in mix_strategy(), n in 1u32..8, seed in any::<u64>(), decay in 0.3f64..1.0) {
        let t = table(n, seed, decay);
        let law = RelayLaw::compute(&t, &m, n, actual_tx_prob(&m)).unwrap();
        let (q, k) = QueueReport::from_law(&law).unwrap();
        prop_assert!(k.check(1e-12).is_ok());
        prop_assert!((k.drift() - q.drift()).abs() < 1e-12);
        prop_assert!(q.lambda0 >= 0.0 && q.mu_r <= m.q_r + 1e-15);
        if let Some(p0) = q.p_empty {
            prop_assert!((0.0..=1.0).contains(&p0));
        }
        prop_assert_eq!(q.stable, q.lambda0 == 0.0 || q.lambda1 < q.mu_r);
    }

    #[test]
    fn rates_match_enumeration(m in mix_strategy(), n in 1u32..=3, seed in any::<u64>()) {
        let t = table(n, seed, 0.8);
        let k = mmrelay::queueing::transition_kernel(&t, &m, n).unwrap();
        let e = oracle::enumerated_kernel(&t, &m, n).unwrap();
        for (a, b) in k.p0.iter().zip(&e.p0).chain(k.p1.iter().zip(&e.p1)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn q_rmin_separates_stability(n in 2u32..6, seed in any::<u64>(), q_u in 0.05f64..0.6) {
        let t = table(n, seed, 0.9);
        let m = StrategyMix { q_u, q_uf: 0.5, q_ur: 0.5, q_r: 1.0, d_a: 0.0 };
        let law = RelayLaw::compute(&t, &m, n, q_u).unwrap();
        let (q, _) = QueueReport::from_law(&law).unwrap();
        if let Some(q_min) = q.q_rmin {
            for (q_r, expect) in [(q_min * 0.98, false), ((q_min * 1.02).min(1.0), true)] {
                if q_r <= 0.0 || q_min == 0.0 || q_r > 1.0 || (q_r - q_min).abs() < 1e-12 {
                    continue;
                }
                let law = RelayLaw::compute(&t, &StrategyMix { q_r, ..m }, n, q_u).unwrap();
                let (r, _) = QueueReport::from_law(&law).unwrap();
                prop_assert_eq!(r.stable, expect);
            }
        }
    }

    #[test]
    fn closed_form_matches_stationary(n in 1u32..6, seed in any::<u64>(), q_u in 0.02f64..0.3) {
        let t = table(n, seed, 0.9);
        let m = StrategyMix { q_u, q_uf: 0.5, q_ur: 0.5, q_r: 1.0, d_a: 0.0 };
        let law = RelayLaw::compute(&t, &m, n, q_u).unwrap();
        let (q, k) = QueueReport::from_law(&law).unwrap();
        prop_assume!(q.stable && q.lambda0 > 0.0 && q.drift() < -1e-3);
        let d = stationary_numeric(&k).unwrap();
        prop_assert!((d.p_empty() - q.p_empty.unwrap()).abs() < 1e-9);
        prop_assert!((d.mean() - q.q_bar.unwrap()).abs() <= 1e-8 * d.mean().max(1.0));
    }

    #[test]
    fn delay_is_at_least_geometric_service(
        m in mix_strategy(),
        ud_f in 0.05f64..1.0, ud_b in 0.05f64..1.0, ur_f in 0.05f64..1.0, frac in 0.0f64..1.0,
        d_q in 0.0f64..10.0,
    ) {
        let c = Components { ud_f, ud_b, ur_f, ur_b: (1.0 - ud_b) * frac };
        let relay = RelayDelay { d_q, service: 1.0 };
        let (d, b) = packet_delay(&c, &m, Some(relay));
        prop_assert!(d >= 1.0 / m.q_u - 1e-9);
        prop_assert!((b.total() - d).abs() <= 1e-9 * d);
        prop_assert!(b.alignment >= -1e-12);
    }

    #[test]
    fn misalignment_probability_is_monotone(theta in 0.01f64..3.0, dtheta in 0.0f64..0.5, sigma in 0.001f64..1.0, dsigma in 0.0f64..0.5) {
        let p = gain_success_prob(theta, sigma);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&p));
        prop_assert!(gain_success_prob(theta + dtheta, sigma) >= p - 1e-15);
        prop_assert!(gain_success_prob(theta, sigma + dsigma) <= p + 1e-15);
    }

    #[test]
    fn throughput_bounded_by_offered_load(n in 1u32..8, seed in any::<u64>(), q_u in 0.01f64..1.0, q_uf in 0.0f64..=1.0) {
        let t = table(n, seed, 0.8);
        let cfg = SceneConfig { n_ues: n, q_u, q_uf, ..SceneConfig::default() };
        let a = analyze(&cfg, &t).unwrap();
        prop_assert!(a.perf.t_aggregate >= 0.0);
        prop_assert!(a.perf.t_aggregate <= f64::from(n) * a.queue.q_tx + 1e-12);
        prop_assert!(a.perf.t_u <= 1.0 + 1e-12);
    }
}
