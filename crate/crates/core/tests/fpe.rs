use std::collections::BTreeMap;

use levylab::fpe::{
    cauchy_bump, composite_form_rhs, evolve_langevin_fpe, evolve_master_equation, evolve_semigroup_fpe,
    master_form_rhs, Advection, SolveConfig, Splitting,
};
use levylab::fraclap::cauchy_semigroup_apply;
use levylab::{catalog_get, Error, GridSpec, TargetDensity};

fn quadratic() -> TargetDensity {
    catalog_get("quadratic_cauchy", &BTreeMap::new()).unwrap()
}

#[test]
fn langevin_equation_keeps_the_target() {
    let t = quadratic();
    let mut cfg = SolveConfig::new(1.0, 1.0, 1.0).unwrap();
    cfg.snapshot_times = vec![0.5, 1.0];
    let rho = t.grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n).unwrap();
    let b = cfg.grid.sample(|x| t.oracle_drift(1.0).unwrap().eval(x)).unwrap();
    let tr = evolve_langevin_fpe(&rho, &b, &cfg, Some(&t)).unwrap();
    let last = tr.last();
    assert!(last.l1_to_target < 1e-4, "L1 {}", last.l1_to_target);
    assert!((last.mass - tr.snapshots[0].mass).abs() < 1e-12);
    assert!((last.variance - 1.0).abs() < 1e-3, "variance {}", last.variance);
}

#[test]
fn semigroup_equation_relaxes_from_a_bump() {
    let t = quadratic();
    let mut cfg = SolveConfig::new(1.0, 1.0, 6.0).unwrap();
    cfg.snapshot_times = vec![0.0, 6.0];
    let rho0 = cauchy_bump(&cfg.grid, 0.0, 0.25).unwrap();
    let tr = evolve_semigroup_fpe(&rho0, &t, &cfg).unwrap();
    let (first, last) = (&tr.snapshots[0], tr.last());
    assert!((last.mass - first.mass).abs() < 1e-10);
    assert!(last.l1_to_target < 0.2 * first.l1_to_target);
    assert!(tr.min_value >= 0.0);
}

#[test]
fn free_master_equation_is_the_cauchy_semigroup() {
    let spec = GridSpec::symmetric(50.0, 2001).unwrap();
    let mut cfg = SolveConfig::new(1.0, 1.0, 0.5).unwrap();
    cfg.grid = spec;
    let rho0 = cauchy_bump(&spec, 0.0, 1.0).unwrap();
    let tr = evolve_master_equation(&rho0, &vec![0.0; spec.n], &cfg, None).unwrap();
    let exact = cauchy_semigroup_apply(&rho0, 1.0, 0.5).unwrap();
    // censoring removes the loss to |z| > L, worth (λ/π)(1/(L-x) + 1/(L+x)) per unit time
    let l = 50.0;
    for x in [0.0, 1.0, 3.0] {
        let i = exact.nearest(x).unwrap();
        let got = tr.last().rho.values()[i];
        let kept = (0.5 / std::f64::consts::PI * (1.0 / (l - x) + 1.0 / (l + x))).exp();
        let want = exact.values()[i] * kept;
        assert!((got - want).abs() < 2e-4 * want, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn master_and_composite_forms_agree() {
    let t = quadratic();
    let spec = GridSpec::symmetric(20.0, 801).unwrap();
    let rho = cauchy_bump(&spec, 0.5, 1.0).unwrap();
    let phi: Vec<f64> = (0..spec.n).map(|i| t.phi(spec.x(i))).collect();
    let a = master_form_rhs(&rho, &phi, 1.0, 1.0).unwrap();
    let b = composite_form_rhs(&rho, &phi, 1.0, 1.0).unwrap();
    for (u, v) in a.values().iter().zip(b.values()) {
        assert!((u - v).abs() < 1e-10 * (1.0 + u.abs()));
    }
}

#[test]
fn upwind_enforces_the_courant_bound() {
    let t = quadratic();
    let mut cfg = SolveConfig::new(1.0, 1.0, 0.1).unwrap();
    cfg.advection = Advection::Upwind;
    cfg.splitting = Splitting::Strang;
    let rho = t.grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n).unwrap();
    let b = cfg.grid.sample(|x| t.oracle_drift(1.0).unwrap().eval(x)).unwrap();
    let err = evolve_langevin_fpe(&rho, &b, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::Cfl { .. }));
    assert_eq!(err.exit_code(), 3);
}
