//! Symmetric α-stable variates.
//!
//! A unit variate has characteristic function `exp(-|p|^mu)`. A variate with
//! intensity `scale` has characteristic function `exp(-scale |p|^mu)` and is
//! obtained as `scale^(1/mu)` times a unit variate. `mu = 1` is the Cauchy law,
//! `mu = 2` the Gaussian law with variance `2 scale`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub mu: f64,
    pub scale: f64,
}

impl StableParams {
    pub fn new(mu: f64, scale: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 2.0) {
            return Err(invalid(format!("stability index mu = {mu} outside (0, 2]")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("scale = {scale} must be positive")));
        }
        Ok(Self { mu, scale })
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        Self::new(1.0, scale)
    }

    /// Multiplier turning a unit variate into one of this intensity.
    #[inline]
    pub fn spread(&self) -> f64 {
        self.scale.powf(1.0 / self.mu)
    }
}

/// Inverse CDF of the standard Cauchy law.
#[inline]
pub fn cauchy_from_uniform(u: f64) -> f64 {
    (PI * (u - 0.5)).tan()
}

#[inline]
pub fn sample_cauchy(rng: &mut RngStream) -> f64 {
    cauchy_from_uniform(rng.uniform_open())
}

/// Unit symmetric stable variate by the Chambers–Mallows–Stuck transform.
#[inline]
pub fn unit_stable(mu: f64, rng: &mut RngStream) -> f64 {
    if mu == 1.0 {
        return sample_cauchy(rng);
    }
    let v = PI * (rng.uniform_open() - 0.5);
    let w = rng.exp1();
    let a = (mu * v).sin() / v.cos().powf(1.0 / mu);
    let b = (((1.0 - mu) * v).cos() / w).powf((1.0 - mu) / mu);
    a * b
}

pub fn sample_stable(params: &StableParams, rng: &mut RngStream) -> Result<f64> {
    if !(params.mu > 0.0 && params.mu <= 2.0) {
        return Err(invalid(format!("stability index mu = {} outside (0, 2]", params.mu)));
    }
    Ok(params.spread() * unit_stable(params.mu, rng))
}

/// Draws `n` variates from one stream.
pub fn sample_many(params: &StableParams, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    StableParams::new(params.mu, params.scale)?;
    let s = params.spread();
    Ok((0..n).map(|_| s * unit_stable(params.mu, rng)).collect())
}

/// `(1/N) Σ cos(p x_i)`, the real part of the empirical characteristic function.
pub fn empirical_char_fn(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empirical characteristic function of an empty sample".into()));
    }
    Ok(samples.iter().map(|x| (p * x).cos()).sum::<f64>() / samples.len() as f64)
}

/// Exact characteristic function of the symmetric law.
pub fn char_fn(params: &StableParams, p: f64) -> f64 {
    (-params.scale * p.abs().powf(params.mu)).exp()
}

/// Tail probability `P(|X| > t)` of a standard Cauchy variate.
pub fn cauchy_two_sided_tail(t: f64) -> f64 {
    2.0 / PI * (1.0 / t).atan()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_inverse_cdf_fixed_points() {
        assert_eq!(cauchy_from_uniform(0.5), 0.0);
        assert!((cauchy_from_uniform(0.75) - 1.0).abs() < 1e-15);
        assert!((cauchy_from_uniform(0.25) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_index() {
        assert!(StableParams::new(0.0, 1.0).is_err());
        assert!(StableParams::new(2.5, 1.0).is_err());
        assert!(StableParams::new(1.5, -1.0).is_err());
        let bad = StableParams { mu: 3.0, scale: 1.0 };
        assert!(sample_stable(&bad, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn empirical_char_fn_trivial_cases() {
        assert_eq!(empirical_char_fn(&[0.0; 10], 3.7).unwrap(), 1.0);
        assert_eq!(empirical_char_fn(&[1.0, -2.0, 5.0], 0.0).unwrap(), 1.0);
        assert!(empirical_char_fn(&[], 1.0).is_err());
    }

    #[test]
    fn gaussian_limit_variance() {
        let p = StableParams::new(2.0, 0.7).unwrap();
        let xs = sample_many(&p, 200_000, &mut RngStream::new(3, 0)).unwrap();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        // var of x^2 for a Gaussian is 2 sigma^4
        let se = (2.0f64).sqrt() * 1.4 / (xs.len() as f64).sqrt();
        assert!((var - 1.4).abs() < 4.0 * se, "var = {var}");
    }

    #[test]
    fn cauchy_median_near_zero() {
        let p = StableParams::cauchy(1.0).unwrap();
        let mut xs = sample_many(&p, 100_000, &mut RngStream::new(11, 0)).unwrap();
        xs.sort_by(f64::total_cmp);
        let median = 0.5 * (xs[49_999] + xs[50_000]);
        // se of the median = 1 / (2 f(0) sqrt(n)) = pi / (2 sqrt(n)) ≈ 0.005
        assert!(median.abs() < 0.02, "median = {median}");
    }

    #[test]
    fn char_fn_at_two() {
        let p = StableParams::cauchy(1.0).unwrap();
        let xs = sample_many(&p, 100_000, &mut RngStream::new(5, 2)).unwrap();
        let phi = empirical_char_fn(&xs, 2.0).unwrap();
        assert!((phi - (-2.0f64).exp()).abs() < 3.0 / (xs.len() as f64).sqrt());
    }
}
