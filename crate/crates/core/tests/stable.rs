use levylab::rng::RngStream;
use levylab::stable::{cauchy_from_uniform, cauchy_two_sided_tail, char_fn, empirical_char_fn, sample_many};
use levylab::StableParams;
use proptest::prelude::*;

#[test]
fn characteristic_function_matches() {
    let n = 200_000;
    for mu in [0.5, 1.0, 1.5] {
        let params = StableParams::new(mu, 0.7).unwrap();
        let xs = sample_many(&params, n, &mut RngStream::new(9, 0)).unwrap();
        for p in [0.3, 1.0, 2.5] {
            let e = empirical_char_fn(&xs, p).unwrap();
            let want = char_fn(&params, p);
            // standard error of a mean of cosines is below 1/sqrt(2n)
            assert!((e - want).abs() < 5.0 / (2.0 * n as f64).sqrt(), "mu {mu} p {p}: {e} vs {want}");
        }
    }
}

#[test]
fn cauchy_tail_fraction() {
    let n = 200_000;
    let xs = sample_many(&StableParams::cauchy(1.0).unwrap(), n, &mut RngStream::new(2, 5)).unwrap();
    let frac = xs.iter().filter(|x| x.abs() > 10.0).count() as f64 / n as f64;
    let want = cauchy_two_sided_tail(10.0);
    assert!((frac - want).abs() < 5.0 * (want / n as f64).sqrt());
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let p = StableParams::new(1.3, 1.0).unwrap();
    let a = sample_many(&p, 100, &mut RngStream::new(1, 0)).unwrap();
    let b = sample_many(&p, 100, &mut RngStream::new(1, 0)).unwrap();
    let c = sample_many(&p, 100, &mut RngStream::new(1, 1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn rejects_bad_parameters() {
    assert!(StableParams::new(2.5, 1.0).is_err());
    assert!(StableParams::new(1.0, -1.0).is_err());
    assert!(empirical_char_fn(&[], 1.0).is_err());
}

proptest! {
    #[test]
    fn cauchy_inverse_cdf_is_odd(u in 1e-6f64..0.5) {
        prop_assert!((cauchy_from_uniform(u) + cauchy_from_uniform(1.0 - u)).abs() < 1e-6 * cauchy_from_uniform(u).abs().max(1.0));
        prop_assert!(cauchy_from_uniform(u) <= cauchy_from_uniform(u + 1e-3));
    }
}
