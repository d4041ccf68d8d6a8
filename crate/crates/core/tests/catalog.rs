use std::collections::BTreeMap;

use levylab::{catalog_get, Error, GridFunction, TargetDensity};

fn target(name: &str, params: &[(&str, f64)]) -> TargetDensity {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    catalog_get(name, &p).unwrap()
}

#[test]
fn densities_integrate_to_their_cdf() {
    let cases: [(&str, &[(&str, f64)]); 6] = [
        ("cauchy_ouc", &[("gamma", 2.0)]),
        ("quadratic_cauchy", &[]),
        ("cauchy_family", &[("alpha", 1.5), ("scale", 2.0)]),
        ("cauchy_alpha4", &[]),
        ("quartic_bimodal_base", &[]),
        ("gibbs_gaussian", &[("kT", 0.5)]),
    ];
    for (name, params) in cases {
        let t = target(name, params);
        let g = t.grid(-30.0, 30.0, 60_001).unwrap();
        let mass = g.integral();
        let expect = t.cdf(30.0) - t.cdf(-30.0);
        assert!((mass - expect).abs() < 1e-6, "{name}: {mass} vs {expect}");
        assert!((t.cdf(0.0) - 0.5).abs() < 1e-9, "{name} is symmetric");
    }
}

#[test]
fn quantile_inverts_cdf() {
    let t = target("cauchy_alpha4", &[]);
    for p in [0.01, 0.25, 0.5, 0.9, 0.999] {
        let x = t.quantile(p).unwrap();
        assert!((t.cdf(x) - p).abs() < 1e-9, "p = {p}");
    }
}

#[test]
fn second_moments() {
    assert!((target("quadratic_cauchy", &[]).variance().unwrap() - 1.0).abs() < 1e-9);
    assert!((target("cauchy_alpha4", &[]).variance().unwrap() - 0.2).abs() < 1e-9);
    assert!((target("gibbs_gaussian", &[("k", 4.0)]).variance().unwrap() - 0.25).abs() < 1e-12);
    assert!(target("cauchy_ouc", &[]).variance().is_none());
}

#[test]
fn closed_form_drifts() {
    let q = target("quadratic_cauchy", &[]).oracle_drift(1.0).unwrap();
    assert_eq!(q.eval(2.0), -7.0);
    assert_eq!(q.eval(-1.0), 2.0);
    let a4 = target("cauchy_alpha4", &[]).oracle_drift(1.0).unwrap();
    assert!((a4.eval(1.0) + 6.0).abs() < 1e-12);
    let ouc = target("cauchy_ouc", &[("gamma", 3.0)]).oracle_drift(1.0).unwrap();
    assert!((ouc.eval(2.0) + 6.0).abs() < 1e-12);
}

#[test]
fn closed_form_potentials() {
    let q = target("quadratic_cauchy", &[]);
    assert!((q.oracle_potential(0.0, 1.0).unwrap() + 1.0).abs() < 1e-12);
    assert!(q.oracle_potential(1.0, 1.0).unwrap().abs() < 1e-12);
    assert!((q.oracle_potential(1e4, 1.0).unwrap() - 1.0).abs() < 1e-6);
    let a4 = target("cauchy_alpha4", &[]);
    assert!((a4.oracle_potential(0.0, 1.0).unwrap() + 1.5).abs() < 1e-12);
}

#[test]
fn rejects_bad_entries() {
    assert!(matches!(catalog_get("nope", &BTreeMap::new()), Err(Error::UnknownTarget(_))));
    let mut p = BTreeMap::new();
    p.insert("alpha".to_string(), 0.5);
    assert!(catalog_get("cauchy_family", &p).is_err());
    p.clear();
    p.insert("colour".to_string(), 1.0);
    assert!(catalog_get("quadratic_cauchy", &p).is_err());
}

#[test]
fn tabulated_target_matches_catalog_entry() {
    let q = target("quadratic_cauchy", &[]);
    let g = GridFunction::from_fn(-200.0, 200.0, 8001, |x| q.density(x)).unwrap();
    let t = TargetDensity::from_table("table", g).unwrap();
    for x in [-3.0, 0.0, 0.7, 12.0] {
        assert!((t.density(x) - q.density(x)).abs() < 1e-6 * q.density(x), "x = {x}");
    }
}
