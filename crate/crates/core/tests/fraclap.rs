use std::f64::consts::PI;

use levylab::fraclap::{cauchy_semigroup_apply, frac_laplacian, frac_laplacian_pv, frac_laplacian_spectral};
use levylab::{GridFunction, Method, OperatorConfig, TailModel};
use proptest::prelude::*;

fn cauchy(width: f64) -> impl Fn(f64) -> f64 {
    move |x| width / (PI * (x * x + width * width))
}

#[test]
fn cauchy_kernel_image() {
    let f = GridFunction::from_fn(-40.0, 40.0, 4001, cauchy(1.0)).unwrap();
    let g = frac_laplacian_pv(&f, &OperatorConfig::pv(1.0, TailModel::PowerLaw(2.0)).unwrap()).unwrap();
    for i in 0..g.len() {
        let x = g.x(i);
        if x.abs() <= 5.0 {
            let exact = (1.0 - x * x) / (PI * (1.0 + x * x).powi(2));
            assert!((g.values()[i] - exact).abs() < 1e-5, "x = {x}");
        }
    }
}

#[test]
fn quadrature_converges_faster_than_the_singular_order() {
    // the leading h^{2-mu} error is removed, so halving h gains more than 2^{0.5}
    let gap = |n: usize| {
        let f = GridFunction::from_fn(-20.0, 20.0, n, |x| (-x * x).exp()).unwrap();
        let a = frac_laplacian_pv(&f, &OperatorConfig::pv(1.5, TailModel::Zero).unwrap()).unwrap();
        let b = frac_laplacian_spectral(&f, &OperatorConfig::spectral(1.5, TailModel::Zero).unwrap()).unwrap();
        a.values().iter().zip(b.result.values()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
    };
    let (coarse, fine) = (gap(1001), gap(2001));
    assert!(fine < coarse / 4.0, "{coarse} -> {fine}");
    assert!(fine < 1e-4);
}

#[test]
fn free_cauchy_semigroup_widens_the_kernel() {
    let f = GridFunction::from_fn(-400.0, 400.0, 8001, cauchy(1.0)).unwrap();
    let g = cauchy_semigroup_apply(&f, 0.5, 2.0).unwrap();
    let want = cauchy(2.0);
    for x in [0.0, 1.0, 5.0] {
        let i = g.nearest(x).unwrap();
        assert!((g.values()[i] - want(x)).abs() < 2e-4, "x = {x}");
    }
}

#[test]
fn dispatch_follows_the_method() {
    let f = GridFunction::from_fn(-10.0, 10.0, 401, |x| (-x * x).exp()).unwrap();
    let pv = frac_laplacian(&f, &OperatorConfig::new(1.0, Method::PvQuadrature, TailModel::Zero).unwrap()).unwrap();
    let sp = frac_laplacian(&f, &OperatorConfig::new(1.0, Method::Spectral, TailModel::Zero).unwrap()).unwrap();
    assert!(pv.values().iter().zip(sp.values()).all(|(a, b)| (a - b).abs() < 1e-3));
    // positive operator: positive at the maximum
    assert!(pv.values()[200] > 0.0);
}

#[test]
fn csv_round_trip() {
    let f = GridFunction::from_fn(-1.0, 1.0, 5, |x| x * x).unwrap();
    let text = f.to_csv(1.0, "pv", &["units: x=length".to_string()]);
    assert!(text.starts_with("# gridfunction mu=1 method=pv\n"));
    assert_eq!(GridFunction::from_csv(&text).unwrap(), f);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn operator_is_linear(a in -3.0f64..3.0, mu in 0.3f64..1.9) {
        let cfg = OperatorConfig::pv(mu, TailModel::Zero).unwrap();
        let f = GridFunction::from_fn(-8.0, 8.0, 161, |x| (-x * x).exp()).unwrap();
        let g = GridFunction::from_fn(-8.0, 8.0, 161, |x| (-(x - 1.0).powi(2)).exp()).unwrap();
        let sum = f.map(|x, v| v + a * (-(x - 1.0).powi(2)).exp()).unwrap();
        let lf = frac_laplacian_pv(&f, &cfg).unwrap();
        let lg = frac_laplacian_pv(&g, &cfg).unwrap();
        let ls = frac_laplacian_pv(&sum, &cfg).unwrap();
        for i in 0..ls.len() {
            let want = lf.values()[i] + a * lg.values()[i];
            prop_assert!((ls.values()[i] - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }
}
