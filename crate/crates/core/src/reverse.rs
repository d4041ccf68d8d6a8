//! Reconstruction of the Langevin drift and the semigroup potential that make a
//! given density stationary, plus the Gaussian-noise analogues.
//!
//! For symmetric stable noise of index `mu` and intensity `lambda`:
//!
//! * drift: `b(x) = -(lambda / ρ(x)) ∫_{-∞}^x (|Δ|^{mu/2} ρ)(s) ds`, with the
//!   constant fixed by zero stationary current at both infinities;
//! * potential: `𝒱(x) = -lambda (|Δ|^{mu/2} ρ^{1/2})(x) / ρ^{1/2}(x)`.

use serde::Serialize;

use crate::catalog::TargetDensity;
use crate::error::{invalid, Error, Result};
use crate::fpe::{stationarity_residual, Generator};
use crate::fraclap::{PvOperator, TailModel};
use crate::grid::{derivative_values, GridFunction, GridSpec};

/// Smallest density value the reconstruction divides by.
pub const POSITIVITY_FLOOR: f64 = 1e-290;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReverseConfig {
    pub mu: f64,
    pub lambda: f64,
    pub grid: GridSpec,
    /// Enforce odd drift / even potential for symmetric targets.
    pub symmetrize: bool,
    /// Combine the operator on steps `h` and `2h` to cancel the leading
    /// `O(h²)` quadrature error.
    pub richardson: bool,
}

impl ReverseConfig {
    /// Window `[-200, 200]` with 8001 nodes.
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 2.0) {
            return Err(invalid(format!("stability index must lie in (0, 2), got {mu}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("noise intensity must be positive, got {lambda}")));
        }
        Ok(Self { mu, lambda, grid: GridSpec::symmetric(200.0, 8001)?, symmetrize: true, richardson: false })
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionResult {
    pub drift: GridFunction,
    pub potential: GridFunction,
    /// L¹ stationarity defect of the reconstructed drift.
    pub residual_norm: f64,
    /// `max |b(x) + b(-x)| / max |b|` before symmetrization.
    pub drift_asymmetry: f64,
    /// `max |𝒱(x) - 𝒱(-x)| / max |𝒱|` before symmetrization.
    pub potential_asymmetry: f64,
    pub density_tail: TailModel,
    pub root_tail: TailModel,
    pub config: ReverseConfig,
}

/// Operator tail model matching the decay of the target density.
pub fn density_tail(target: &TargetDensity) -> TailModel {
    match target.tail_exponent() {
        Some(p) => TailModel::PowerLaw(p),
        None => TailModel::Zero,
    }
}

fn halve(tail: TailModel) -> TailModel {
    match tail {
        TailModel::PowerLaw(p) => TailModel::PowerLaw(0.5 * p),
        other => other,
    }
}

pub(crate) fn sample_positive(target: &TargetDensity, spec: &GridSpec) -> Result<GridFunction> {
    let rho = spec.sample(|x| target.density(x))?;
    for (i, &v) in rho.values().iter().enumerate() {
        if !(v > POSITIVITY_FLOOR) {
            return Err(Error::PositivityFloor { x: rho.x(i), value: v });
        }
    }
    Ok(rho)
}

/// `|Δ|^{mu/2}` on node values, optionally Richardson-extrapolated against the
/// two interleaved sub-grids of step `2h`.
pub(crate) fn apply_operator(values: &[f64], spec: &GridSpec, mu: f64, tail: TailModel, richardson: bool) -> Result<Vec<f64>> {
    let fine = PvOperator::new(spec.x_min, spec.x_max, spec.n, mu, tail)?.apply_values(values)?;
    if !richardson || spec.n < 9 {
        return Ok(fine);
    }
    let h = spec.h();
    let mut coarse = vec![0.0; spec.n];
    for offset in 0..2 {
        let idx: Vec<usize> = (offset..spec.n).step_by(2).collect();
        let last = *idx.last().unwrap();
        let sub: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let op = PvOperator::new(spec.x_min + offset as f64 * h, spec.x_min + last as f64 * h, idx.len(), mu, tail)?;
        for (k, v) in op.apply_values(&sub)?.into_iter().enumerate() {
            coarse[idx[k]] = v;
        }
    }
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

fn is_mirror(spec: &GridSpec) -> bool {
    (spec.x_min + spec.x_max).abs() <= 1e-12 * spec.x_max.abs().max(1.0)
}

fn symmetrize(values: &mut [f64], parity: f64) -> f64 {
    let n = values.len();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut asym = 0.0f64;
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let (a, b) = (values[i], values[j]);
        asym = asym.max((a - parity * b).abs());
        let m = 0.5 * (a + parity * b);
        values[i] = m;
        values[j] = parity * m;
    }
    if n % 2 == 1 && parity < 0.0 {
        asym = asym.max(2.0 * values[n / 2].abs());
        values[n / 2] = 0.0;
    }
    asym / scale
}

/// Cumulative integral of `g` with an Euler–Maclaurin end correction.
fn cumulative(g: &[f64], h: f64) -> Vec<f64> {
    let gp = derivative_values(g, h);
    let mut out = vec![0.0; g.len()];
    let mut acc = 0.0;
    for i in 1..g.len() {
        acc += 0.5 * h * (g[i - 1] + g[i]);
        out[i] = acc - h * h / 12.0 * (gp[i] - gp[0]);
    }
    out
}

fn raw_drift(rho: &GridFunction, cfg: &ReverseConfig, tail: TailModel) -> Result<Vec<f64>> {
    let spec = rho.spec();
    let g = apply_operator(rho.values(), &spec, cfg.mu, tail, cfg.richardson)?;
    let cum = cumulative(&g, spec.h());
    let n = spec.n;
    let total = cum[n - 1];
    // far field of the operator output decays like |x|^{-1-mu}
    let mu = cfg.mu;
    let tail_left = if spec.x_min < 0.0 { g[0] * spec.x_min.abs() / mu } else { 0.0 };
    let tail_right = if spec.x_max > 0.0 { g[n - 1] * spec.x_max / mu } else { 0.0 };
    // average the two zero-current conditions at -∞ and +∞
    let shift = 0.5 * (tail_left - tail_right - total);
    Ok(cum
        .iter()
        .zip(rho.values())
        .map(|(c, r)| -cfg.lambda * (c + shift) / r)
        .collect())
}

/// Langevin drift whose stationary law is `target`.
pub fn drift_from_target(target: &TargetDensity, cfg: &ReverseConfig) -> Result<GridFunction> {
    let rho = sample_positive(target, &cfg.grid)?;
    let mut b = raw_drift(&rho, cfg, density_tail(target))?;
    if cfg.symmetrize && target.is_symmetric() && is_mirror(&cfg.grid) {
        symmetrize(&mut b, -1.0);
    }
    rho.with_values(b)
}

fn raw_potential(rho: &GridFunction, cfg: &ReverseConfig, tail: TailModel) -> Result<Vec<f64>> {
    let root: Vec<f64> = rho.values().iter().map(|v| v.sqrt()).collect();
    let g = apply_operator(&root, &rho.spec(), cfg.mu, tail, cfg.richardson)?;
    Ok(g.iter().zip(&root).map(|(g, r)| -cfg.lambda * g / r).collect())
}

/// Semigroup potential whose ground state is `target^{1/2}`.
pub fn semigroup_potential_from_target(target: &TargetDensity, cfg: &ReverseConfig) -> Result<GridFunction> {
    let rho = sample_positive(target, &cfg.grid)?;
    let mut v = raw_potential(&rho, cfg, halve(density_tail(target)))?;
    if cfg.symmetrize && target.is_symmetric() && is_mirror(&cfg.grid) {
        symmetrize(&mut v, 1.0);
    }
    rho.with_values(v)
}

/// Both reconstructions plus diagnostics.
pub fn reconstruct(target: &TargetDensity, cfg: &ReverseConfig) -> Result<ReconstructionResult> {
    let rho = sample_positive(target, &cfg.grid)?;
    let tail = density_tail(target);
    let root_tail = halve(tail);
    let mut b = raw_drift(&rho, cfg, tail)?;
    let mut v = raw_potential(&rho, cfg, root_tail)?;
    let (mut drift_asymmetry, mut potential_asymmetry) = (f64::NAN, f64::NAN);
    if target.is_symmetric() && is_mirror(&cfg.grid) {
        let (mut bc, mut vc) = (b.clone(), v.clone());
        drift_asymmetry = symmetrize(&mut bc, -1.0);
        potential_asymmetry = symmetrize(&mut vc, 1.0);
        if cfg.symmetrize {
            b = bc;
            v = vc;
        }
    }
    let drift = rho.with_values(b)?;
    let potential = rho.with_values(v)?;
    let residual_norm = stationarity_residual(&rho, Generator::Drift(&drift), cfg.mu, cfg.lambda, tail)?;
    Ok(ReconstructionResult {
        drift,
        potential,
        residual_norm,
        drift_asymmetry,
        potential_asymmetry,
        density_tail: tail,
        root_tail,
        config: *cfg,
    })
}

fn ln_density_grid(target: &TargetDensity, spec: &GridSpec) -> Result<GridFunction> {
    sample_positive(target, spec)?;
    spec.sample(|x| target.ln_density(x))
}

fn second_derivative_values(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let h2 = h * h;
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h2)
            } else {
                let c = i.clamp(1, n - 2);
                (f[c - 1] - 2.0 * f[c] + f[c + 1]) / h2
            }
        })
        .collect()
}

/// Gaussian-noise drift `b = D d(ln ρ)/dx`.
pub fn gaussian_drift_from_target(target: &TargetDensity, d: f64, spec: &GridSpec) -> Result<GridFunction> {
    let ln_rho = ln_density_grid(target, spec)?;
    let db = derivative_values(ln_rho.values(), spec.h());
    ln_rho.with_values(db.into_iter().map(|v| d * v).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianPotential {
    /// `D Δρ^{1/2} / ρ^{1/2}`, evaluated as `D (Φ'' + Φ'^2)` with `Φ = ln ρ / 2`.
    pub potential: GridFunction,
    /// Sup-norm gap to `(b²/(2D) + b') / 2` built from the drift.
    pub discrepancy: f64,
}

/// Gaussian-noise potential with the drift-based cross-check.
pub fn gaussian_potential_from_target(target: &TargetDensity, d: f64, spec: &GridSpec) -> Result<GaussianPotential> {
    if !(d > 0.0) {
        return Err(invalid(format!("diffusion coefficient must be positive, got {d}")));
    }
    let ln_rho = ln_density_grid(target, spec)?;
    let h = spec.h();
    let phi: Vec<f64> = ln_rho.values().iter().map(|v| 0.5 * v).collect();
    let dphi = derivative_values(&phi, h);
    let ddphi = second_derivative_values(&phi, h);
    let v8: Vec<f64> = dphi.iter().zip(&ddphi).map(|(p1, p2)| d * (p2 + p1 * p1)).collect();
    let b: Vec<f64> = dphi.iter().map(|p| 2.0 * d * p).collect();
    let db = derivative_values(&b, h);
    let discrepancy = (2..spec.n - 2)
        .map(|i| (0.5 * (b[i] * b[i] / (2.0 * d) + db[i]) - v8[i]).abs())
        .fold(0.0, f64::max);
    Ok(GaussianPotential { potential: ln_rho.with_values(v8)?, discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_reports_asymmetry() {
        let mut v = vec![1.0, 0.5, 0.1, -0.4, -1.0];
        let a = symmetrize(&mut v, -1.0);
        assert_eq!(v, vec![1.0, 0.45, 0.0, -0.45, -1.0]);
        assert!((a - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cumulative_integrates_cubic_exactly() {
        let h = 0.1;
        let g: Vec<f64> = (0..41).map(|i| (i as f64 * h).powi(3)).collect();
        let c = cumulative(&g, h);
        assert!((c[40] - 4f64.powi(4) / 4.0).abs() < 1e-9);
    }
}
