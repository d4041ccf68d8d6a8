use std::collections::BTreeMap;

use levylab::ensemble::uniform_times;
use levylab::langevin::Initial;
use levylab::semigroup::{jump_rate_density, simulate_positions, total_escape_rate, KmcModel, SemigroupConfig};
use levylab::stats::{ks_statistic, sorted_copy, KS_CRITICAL_1PCT};
use levylab::{catalog_get, TargetDensity};

fn target(name: &str) -> TargetDensity {
    catalog_get(name, &BTreeMap::new()).unwrap()
}

#[test]
fn rates_satisfy_detailed_balance() {
    let t = target("quadratic_cauchy");
    let cfg = SemigroupConfig::new(t.clone(), 1.0, 1.0, 1e-2);
    for (x, z) in [(0.0, 1.0), (-2.0, 5.0), (0.3, -0.1)] {
        let a = jump_rate_density(x, z, &cfg).unwrap() * t.density(x);
        let b = jump_rate_density(z, x, &cfg).unwrap() * t.density(z);
        assert!((a - b).abs() < 1e-12 * a.abs());
    }
    assert!(jump_rate_density(0.0, 0.001, &cfg).is_err());
}

#[test]
fn escape_rate_is_symmetric_and_cached_accurately() {
    let cfg = SemigroupConfig::new(target("cauchy_alpha4"), 1.0, 1.0, 1e-2);
    let model = KmcModel::new(&cfg).unwrap();
    for x in [0.0, 0.5, 3.0, 20.0] {
        let direct = total_escape_rate(x, &cfg);
        assert!((direct - total_escape_rate(-x, &cfg)).abs() < 1e-9 * direct);
        assert!((model.escape_rate(x) - direct).abs() < 1e-6 * direct, "x = {x}");
    }
}

#[test]
fn stationary_start_stays_stationary() {
    let t = target("quadratic_cauchy");
    let mut cfg = SemigroupConfig::new(t.clone(), 1.0, 1.0, 1e-2);
    cfg.n_paths = 4000;
    cfg.t_final = 2.0;
    cfg.initial = Initial::Target(Box::new(t.clone()));
    let (pos, counters) = simulate_positions(&KmcModel::new(&cfg).unwrap(), &[2.0]).unwrap();
    let xs = sorted_copy(&pos[0]);
    let d = ks_statistic(&xs, |x| t.cdf(x));
    assert!(d < KS_CRITICAL_1PCT / (xs.len() as f64).sqrt(), "KS {d}");
    assert!(counters.jumps > 0 && counters.envelope_violations == 0);
}

#[test]
fn worker_count_does_not_change_paths() {
    let mut cfg = SemigroupConfig::new(target("quadratic_cauchy"), 1.0, 1.0, 1e-2);
    cfg.n_paths = 2500;
    cfg.t_final = 1.0;
    let times = uniform_times(1.0, 4);
    let (a, _) = simulate_positions(&KmcModel::new(&cfg).unwrap(), &times).unwrap();
    cfg.workers = 3;
    let (b, _) = simulate_positions(&KmcModel::new(&cfg).unwrap(), &times).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_configuration() {
    let mut cfg = SemigroupConfig::new(target("quadratic_cauchy"), 1.0, 1.0, 0.0);
    assert!(KmcModel::new(&cfg).is_err());
    cfg.epsilon = 0.01;
    cfg.mu = 2.0;
    assert!(KmcModel::new(&cfg).is_err());
}
