use std::collections::BTreeMap;

use levylab::ensemble::uniform_times;
use levylab::langevin::{langevin_step_with_noise, simulate_positions, Initial, LangevinConfig, Scheme};
use levylab::stats::{iqr_sorted, sorted_copy};
use levylab::{catalog_get, Drift};

#[test]
fn implicit_step_solves_the_backward_equation() {
    let drift = Drift::Polynomial { coeffs: vec![0.0, -1.5, 0.0, -0.5] };
    let mut cfg = LangevinConfig::new(drift.clone(), 1.0, 1.0);
    cfg.scheme = Scheme::DriftImplicit;
    cfg.dt = 0.01;
    for (x, xi) in [(0.0, 0.3), (2.0, -1.0), (0.0, 1e5), (-40.0, 2.0)] {
        let z = langevin_step_with_noise(x, xi, &cfg);
        let y = x + cfg.noise_scale() * xi;
        assert!((z - cfg.dt * drift.eval(z) - y).abs() < 1e-9 * y.abs().max(1.0), "x {x} xi {xi}");
    }
}

#[test]
fn explicit_scheme_is_rejected_for_superlinear_drift() {
    let mut cfg = LangevinConfig::new(Drift::Polynomial { coeffs: vec![0.0, 0.0, 0.0, -1.0] }, 1.0, 1.0);
    cfg.scheme = Scheme::ExplicitEuler;
    assert!(cfg.validate().is_err());
}

#[test]
fn ornstein_uhlenbeck_cauchy_reaches_its_scale() {
    let t = catalog_get("cauchy_ouc", &BTreeMap::new()).unwrap();
    let mut cfg = LangevinConfig::new(t.oracle_drift(1.0).unwrap(), 1.0, 1.0);
    cfg.n_paths = 20_000;
    cfg.t_final = 6.0;
    cfg.dt = 0.01;
    let (pos, failed) = simulate_positions(&cfg, &[6.0]).unwrap();
    assert_eq!(failed, 0);
    let q = iqr_sorted(&sorted_copy(&pos[0]));
    assert!((q - 2.0).abs() < 0.1, "IQR {q}");
}

#[test]
fn results_do_not_depend_on_workers() {
    let mut cfg = LangevinConfig::new(Drift::Linear { gamma: 1.0 }, 1.3, 1.0);
    cfg.n_paths = 2500;
    cfg.t_final = 0.5;
    cfg.initial = Initial::Bump { x0: 0.0, width: 0.25, lo: -50.0, hi: 50.0 };
    let times = uniform_times(0.5, 5);
    let (a, _) = simulate_positions(&cfg, &times).unwrap();
    cfg.workers = 4;
    let (b, _) = simulate_positions(&cfg, &times).unwrap();
    assert_eq!(a, b);
}
