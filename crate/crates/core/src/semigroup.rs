//! Kinetic Monte Carlo for the jump process whose rates are the free stable
//! rates reweighted by `exp[Φ(z) - Φ(x)]`, `Φ = ln ρ_* / 2`, with jumps
//! shorter than `ε` removed.
//!
//! The reweighting satisfies detailed balance with respect to `ρ_*` for every
//! `ε`, so the target stays exactly stationary; `ε` only controls how closely
//! the step process approximates the untruncated one.

use serde::Serialize;

use crate::catalog::TargetDensity;
use crate::ensemble::{run_blocks, BlockOutput, EnsembleStats, HistogramSpec};
use crate::error::{invalid, Error, Result};
use crate::fraclap::riesz_constant;
use crate::langevin::Initial;
use crate::quad::integrate;
use crate::rng::RngStream;

/// Overall acceptance below which the rejection envelope is declared broken.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Proposals allowed for a single jump before giving up.
const MAX_ATTEMPTS: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct SemigroupConfig {
    pub target: TargetDensity,
    pub mu: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Half-width of the cached region for `Λ(x)` and the `Φ` range maxima.
    pub domain_bound: f64,
    pub cache_points: usize,
    pub n_paths: usize,
    pub t_final: f64,
    pub initial: Initial,
    pub seed: u64,
    pub workers: usize,
}

impl SemigroupConfig {
    pub fn new(target: TargetDensity, mu: f64, lambda: f64, epsilon: f64) -> Self {
        // light tails make exp(-Φ) overflow far out; keep the cache where Φ is moderate
        let domain_bound = match target.tail_exponent() {
            Some(_) => target.window(),
            None => target.window().min(30.0 * target.scale()),
        };
        Self {
            target,
            mu,
            lambda,
            epsilon,
            domain_bound,
            cache_points: 4001,
            n_paths: 100_000,
            t_final: 20.0,
            initial: Initial::Point(0.0),
            seed: 1,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(invalid(format!("stability index must lie in (0, 2), got {}", self.mu)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("noise intensity must be positive, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("minimal jump size must be positive, got {}", self.epsilon)));
        }
        if !(self.domain_bound > 0.0) || self.cache_points < 4 {
            return Err(invalid("domain_bound must be positive and cache_points at least 4"));
        }
        if !(self.t_final > 0.0) || self.n_paths == 0 {
            return Err(invalid("need t_final > 0 and at least one path"));
        }
        if let Some(p) = self.target.tail_exponent() {
            // the rate integrand decays like |u|^{-1-mu-p/2}
            if !(p > 0.0) {
                return Err(invalid("target tail exponent must be positive"));
            }
        }
        Ok(())
    }
}

/// Rate density of a jump from `x` to `z`.
pub fn jump_rate_density(x: f64, z: f64, cfg: &SemigroupConfig) -> Result<f64> {
    if (z - x).abs() < cfg.epsilon {
        return Err(invalid(format!("jump {x} -> {z} shorter than epsilon = {}", cfg.epsilon)));
    }
    let t = &cfg.target;
    Ok(cfg.lambda * riesz_constant(cfg.mu) * (t.phi(z) - t.phi(x)).exp() / (z - x).abs().powf(1.0 + cfg.mu))
}

/// `Λ(x) = ∫_{|u| ≥ ε} rate(x, x+u) du` over the whole line: adaptive
/// quadrature on geometric pieces plus a power-law remainder.
pub fn total_escape_rate(x: f64, cfg: &SemigroupConfig) -> f64 {
    escape_rate(&cfg.target, x, cfg.mu, cfg.lambda, cfg.epsilon)
}

fn escape_rate(target: &TargetDensity, x: f64, mu: f64, lambda: f64, eps: f64) -> f64 {
    let phx = target.phi(x);
    let scale = target.scale();
    let far = 4.0 * (x.abs() + 10.0 * scale).max(100.0 * eps);
    let mut pts = Vec::new();
    let mut u = eps;
    while u < far {
        pts.push(u);
        u *= 2.0;
    }
    for k in [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0] {
        let c = x.abs() + k * scale;
        if c > eps && c < far {
            pts.push(c);
        }
    }
    pts.push(far);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let tail_p = target.tail_exponent();
    let mut total = 0.0;
    for sign in [-1.0, 1.0] {
        let f = |u: f64| (target.phi(x + sign * u) - phx).exp() * u.powf(-1.0 - mu);
        for ab in pts.windows(2) {
            total += integrate(f, ab[0], ab[1], 1e-300, 1e-11).value;
        }
        if let Some(p) = tail_p {
            total += (target.phi(x + sign * far) - phx).exp() * far.powf(-mu) / (mu + 0.5 * p);
        }
    }
    lambda * riesz_constant(mu) * total
}

/// Sparse table of range maxima over a sampled `Φ`.
#[derive(Debug, Clone)]
struct RangeMax {
    x0: f64,
    h: f64,
    levels: Vec<Vec<f64>>,
    /// bound on the variation of `Φ` inside one cell
    margin: f64,
    edge_left: f64,
    edge_right: f64,
}

impl RangeMax {
    fn new(values: Vec<f64>, x0: f64, h: f64) -> Self {
        let margin = values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let edge_left = values[0];
        let edge_right = *values.last().unwrap();
        let mut levels = vec![values];
        let mut span = 1;
        while 2 * span <= levels[0].len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..prev.len() - span).map(|i| prev[i].max(prev[i + span])).collect();
            levels.push(next);
            span *= 2;
        }
        Self { x0, h, levels, margin, edge_left, edge_right }
    }

    /// Upper bound of `Φ` on `[a, b]`; beyond the table the tails are taken as
    /// decreasing away from the window.
    fn query(&self, a: f64, b: f64) -> f64 {
        let n = self.levels[0].len();
        let last = self.x0 + (n - 1) as f64 * self.h;
        let mut m = f64::NEG_INFINITY;
        if a < self.x0 {
            m = m.max(self.edge_left);
        }
        if b > last {
            m = m.max(self.edge_right);
        }
        let lo = ((a - self.x0) / self.h).floor().max(0.0);
        let hi = ((b - self.x0) / self.h).ceil().min((n - 1) as f64);
        if lo <= hi {
            let (lo, hi) = (lo as usize, hi as usize);
            let len = hi - lo + 1;
            let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
            let lv = &self.levels[k];
            m = m.max(lv[lo].max(lv[hi + 1 - (1 << k)]));
        }
        m + self.margin
    }
}

/// Precomputed state shared by all paths: cached `Λ` and `Φ` range maxima.
#[derive(Debug, Clone)]
pub struct KmcModel {
    cfg: SemigroupConfig,
    x0: f64,
    h: f64,
    rates: Vec<f64>,
    phi_range: RangeMax,
    phi_max: f64,
}

/// Per-run proposal counters.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KmcCounters {
    pub jumps: u64,
    pub proposals: u64,
    /// Proposals whose acceptance ratio exceeded one (envelope not dominating).
    pub envelope_violations: u64,
}

impl KmcCounters {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.jumps as f64 / self.proposals as f64
        }
    }
}

impl KmcModel {
    pub fn new(cfg: &SemigroupConfig) -> Result<Self> {
        cfg.validate()?;
        let b = cfg.domain_bound;
        let m = cfg.cache_points;
        let h = 2.0 * b / (m - 1) as f64;
        let rates: Vec<f64> = (0..m)
            .map(|i| escape_rate(&cfg.target, -b + i as f64 * h, cfg.mu, cfg.lambda, cfg.epsilon))
            .collect();
        if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Divergent(format!("escape rate at x = {} is {}", -b + i as f64 * h, rates[i])));
        }
        let fine = 4 * (m - 1) + 1;
        let hf = 2.0 * b / (fine - 1) as f64;
        let phis: Vec<f64> = (0..fine).map(|i| cfg.target.phi(-b + i as f64 * hf)).collect();
        let phi_max = cfg.target.phi_max();
        Ok(Self { cfg: cfg.clone(), x0: -b, h, rates, phi_range: RangeMax::new(phis, -b, hf), phi_max })
    }

    pub fn config(&self) -> &SemigroupConfig {
        &self.cfg
    }

    /// `Λ(x)` from the cache (Catmull–Rom cubic), or by direct quadrature
    /// outside it.
    pub fn escape_rate(&self, x: f64) -> f64 {
        let n = self.rates.len();
        let s = (x - self.x0) / self.h;
        if !(s >= 1.0 && s <= (n - 2) as f64) {
            return escape_rate(&self.cfg.target, x, self.cfg.mu, self.cfg.lambda, self.cfg.epsilon);
        }
        let i = (s.floor() as usize).min(n - 3);
        let t = s - i as f64;
        let (p0, p1, p2, p3) = (self.rates[i - 1], self.rates[i], self.rates[i + 1], self.rates[i + 2]);
        p1 + 0.5
            * t
            * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }

    /// Destination drawn from `rate(x, ·) / Λ(x)` by rejection against a
    /// two-piece envelope of free stable proposals: jumps up to `R` are
    /// bounded with the local maximum of `Φ`, longer jumps with the global one.
    pub fn sample_destination(&self, x: f64, rng: &mut RngStream, counters: &mut KmcCounters) -> Result<f64> {
        let mu = self.cfg.mu;
        let eps = self.cfg.epsilon;
        let target = &self.cfg.target;
        let phx = target.phi(x);
        let r = eps.max(0.25 * x.abs());
        let inv_eps = eps.powf(-mu);
        let inv_r = r.powf(-mu);
        let w_near = inv_eps - inv_r;
        let m_near = if r > eps { (self.phi_range.query(x - r, x + r) - phx).exp() } else { 0.0 };
        let m_far = (self.phi_max - phx).exp();
        let near_weight = w_near * m_near;
        let p_near = near_weight / (near_weight + inv_r * m_far);
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            let near = rng.uniform_open() < p_near;
            let v = rng.uniform_open();
            let (len, m) = if near {
                ((inv_eps - v * w_near).powf(-1.0 / mu), m_near)
            } else {
                (r * v.powf(-1.0 / mu), m_far)
            };
            let z = x + rng.sign() * len;
            let ratio = (target.phi(z) - phx).exp() / m;
            if ratio > 1.0 {
                counters.envelope_violations += 1;
            }
            if rng.uniform_open() < ratio {
                counters.proposals += attempts;
                counters.jumps += 1;
                return Ok(z);
            }
            if attempts >= MAX_ATTEMPTS {
                return Err(Error::EnvelopeFailure { x, acceptance: 1.0 / attempts as f64 });
            }
        }
    }

    /// One Gillespie step: exponential waiting time and destination.
    pub fn sample_jump(&self, x: f64, rng: &mut RngStream, counters: &mut KmcCounters) -> Result<(f64, f64)> {
        let wait = rng.exp1() / self.escape_rate(x);
        let z = self.sample_destination(x, rng, counters)?;
        Ok((wait, z))
    }
}

/// Positions at the snapshot times and proposal counters.
pub fn simulate_positions(model: &KmcModel, snapshot_times: &[f64]) -> Result<(Vec<Vec<f64>>, KmcCounters)> {
    let cfg = model.config();
    for &t in snapshot_times {
        if !(t >= 0.0 && t <= cfg.t_final) {
            return Err(invalid(format!("snapshot time {t} outside [0, {}]", cfg.t_final)));
        }
    }
    if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("snapshot times must be nondecreasing"));
    }
    let run = run_blocks(cfg.n_paths, cfg.workers, snapshot_times.len(), |block, count| {
        let mut rng = RngStream::new(cfg.seed, block);
        let mut counters = KmcCounters::default();
        let mut positions = vec![Vec::with_capacity(count); snapshot_times.len()];
        for _ in 0..count {
            let mut x = cfg.initial.draw(&mut rng);
            let mut t = 0.0;
            let mut s = 0;
            while s < snapshot_times.len() {
                let (wait, z) = model.sample_jump(x, &mut rng, &mut counters)?;
                let t_next = t + wait;
                while s < snapshot_times.len() && snapshot_times[s] < t_next {
                    positions[s].push(x);
                    s += 1;
                }
                x = z;
                t = t_next;
            }
        }
        Ok(BlockOutput {
            positions,
            failed: 0,
            counters: [counters.jumps, counters.proposals, counters.envelope_violations, 0],
        })
    })?;
    let counters = KmcCounters { jumps: run.counters[0], proposals: run.counters[1], envelope_violations: run.counters[2] };
    if counters.acceptance() < MIN_ACCEPTANCE {
        return Err(Error::EnvelopeFailure { x: f64::NAN, acceptance: counters.acceptance() });
    }
    Ok((run.positions, counters))
}

pub fn run_semigroup_ensemble(
    model: &KmcModel,
    snapshot_times: &[f64],
    with_variance: bool,
    hist: Option<(HistogramSpec, &[f64])>,
) -> Result<(EnsembleStats, KmcCounters)> {
    let (positions, counters) = simulate_positions(model, snapshot_times)?;
    Ok((EnsembleStats::from_positions(snapshot_times, &positions, with_variance, hist), counters))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::catalog::catalog_get;

    #[test]
    fn range_max_bounds_samples() {
        let vals: Vec<f64> = (0..101).map(|i| -((i as f64 - 37.0) / 10.0).powi(2)).collect();
        let rm = RangeMax::new(vals.clone(), 0.0, 1.0);
        for (a, b) in [(0.0f64, 100.0f64), (40.0, 60.0), (3.5, 9.2), (-5.0, 2.0), (90.0, 200.0)] {
            let exact = vals
                .iter()
                .enumerate()
                .filter(|(i, _)| (*i as f64) >= a.floor() && (*i as f64) <= b.ceil())
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let q = rm.query(a, b);
            assert!(q >= exact && q <= exact + rm.margin + 1e-12, "[{a},{b}] {q} vs {exact}");
        }
    }

    #[test]
    fn cache_interpolation_tracks_quadrature() {
        let t = catalog_get("quadratic_cauchy", &BTreeMap::new()).unwrap();
        let mut cfg = SemigroupConfig::new(t, 1.0, 1.0, 0.05);
        cfg.domain_bound = 20.0;
        cfg.cache_points = 801;
        let model = KmcModel::new(&cfg).unwrap();
        for &x in &[0.013, 0.77, -2.31, 7.9, 30.0] {
            let direct = total_escape_rate(x, &cfg);
            assert!((model.escape_rate(x) / direct - 1.0).abs() < 1e-5, "x={x}");
        }
    }
}
