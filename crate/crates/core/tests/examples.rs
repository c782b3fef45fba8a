//! Worked examples with known answers.

use mmrelay::channel::gain_success_prob;
use mmrelay::queueing::repeat_probability;
use mmrelay::sweep::{run_sweep, Axis, SweepSpec};
use mmrelay::validation::validate;
use mmrelay::{analyze, build_success_table, SceneConfig, StrategyMix, SuccessTable};

#[test]
fn repeat_probability_of_even_mix() {
    let m = StrategyMix {
        q_u: 0.5,
        q_uf: 0.5,
        q_ur: 0.5,
        q_r: 1.0,
        d_a: 0.0,
    };
    assert!((repeat_probability(&m) - 0.375).abs() < 1e-15);
}

#[test]
fn misalignment_reference_value() {
    let p = gain_success_prob(5f64.to_radians(), 10f64.to_radians());
    assert!((p - 0.383).abs() < 1e-3, "{p}");
    assert_eq!(gain_success_prob(0.1, 0.0), 1.0);
}

#[test]
fn direct_only_users_never_load_the_relay() {
    let t = SuccessTable::from_fn(4, |_| 0.6);
    let cfg = SceneConfig {
        n_ues: 4,
        q_uf: 1.0,
        q_ur: 0.0,
        ..SceneConfig::default()
    };
    let a = analyze(&cfg, &t).unwrap();
    assert_eq!(a.queue.q_rmin, Some(0.0));
    assert!(a.queue.stable);
    assert_eq!(a.queue.lambda0, 0.0);
}

#[test]
fn single_point_sweep_equals_analyze() {
    let cfg = SceneConfig {
        n_ues: 3,
        n_shadow_samples: 2_000,
        ..SceneConfig::default()
    };
    let spec = SweepSpec::new(cfg.clone(), vec![Axis::new("q_u", vec![cfg.q_u]).unwrap()]);
    let out = run_sweep(&spec).unwrap();
    let direct = analyze(&cfg, &build_success_table(&cfg).unwrap()).unwrap();
    assert_eq!(out.points[0].analysis.as_ref().unwrap(), &direct);
}

#[test]
fn validation_matrix_passes_on_defaults() {
    let cfg = SceneConfig {
        n_ues: 3,
        n_shadow_samples: 10_000,
        ..SceneConfig::default()
    };
    let t = build_success_table(&cfg).unwrap();
    let report = validate(&cfg, &t).unwrap();
    assert!(report.passed(), "{:#?}", report.checks);
}

#[test]
fn higher_threshold_shifts_delay_to_user_side() {
    let base = SceneConfig {
        n_ues: 10,
        q_u: 0.5,
        d_a: 5.0,
        n_shadow_samples: 20_000,
        ..SceneConfig::default()
    };
    let strict = SceneConfig {
        gamma_db: 15.0,
        ..base.clone()
    };
    let a = analyze(&strict, &build_success_table(&strict).unwrap()).unwrap();
    let b = a.perf.d_breakdown;
    assert!(b.ue_tx + b.alignment > b.queueing, "{b:?}");
}

#[test]
fn invalid_configuration_names_the_field() {
    let cfg = SceneConfig {
        q_uf: 1.5,
        ..SceneConfig::default()
    };
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("q_uf"), "{err}");
}
