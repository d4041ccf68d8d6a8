//! Grid evolution of the two fractional transport equations and stationarity
//! checks.
//!
//! Both evolvers advance cell averages `ρ_i` on a uniform window. Jumps use
//! the exchange (gain/loss) form of the discretized operator, so mass moved by
//! jumps is conserved to roundoff. In the Langevin equation the advective part
//! is a flux-form semi-Lagrangian remap along backward characteristics, which
//! is conservative and positive for any time step; an explicit upwind option
//! with a CFL check is kept for diagnosis.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::catalog::TargetDensity;
use crate::error::{invalid, Error, Result};
use crate::fraclap::{exchange_weights, riesz_constant, PvOperator, TailModel, ToeplitzConv};
use crate::grid::{derivative_values, GridFunction, GridSpec};

/// Generator whose stationarity defect is measured.
#[derive(Debug, Clone, Copy)]
pub enum Generator<'a> {
    /// Langevin form `-∂(bρ) - λ|Δ|^{μ/2}ρ`.
    Drift(&'a GridFunction),
    /// Semigroup form `-λρ^{1/2}|Δ|^{μ/2}[ρ^{-1/2}ρ] - 𝒱ρ`.
    Potential(&'a GridFunction),
}

/// h-weighted L¹ norm of the generator applied to `rho_star`. `tail` is the
/// operator tail model for the density; the semigroup form uses half its
/// exponent for `ρ^{1/2}`.
pub fn stationarity_residual(
    rho_star: &GridFunction,
    generator: Generator<'_>,
    mu: f64,
    lambda: f64,
    tail: TailModel,
) -> Result<f64> {
    let residual = stationarity_defect(rho_star, generator, mu, lambda, tail)?;
    Ok(residual.values().iter().map(|v| v.abs()).sum::<f64>() * residual.h())
}

/// Pointwise right-hand side evaluated at `rho_star`.
pub fn stationarity_defect(
    rho_star: &GridFunction,
    generator: Generator<'_>,
    mu: f64,
    lambda: f64,
    tail: TailModel,
) -> Result<GridFunction> {
    let rho = rho_star.values();
    let r = match generator {
        Generator::Drift(b) => {
            rho_star.ensure_same_grid(b)?;
            let op = PvOperator::for_grid(rho_star, mu, tail)?;
            let jump = op.apply_values(rho)?;
            let flux: Vec<f64> = b.values().iter().zip(rho).map(|(b, r)| b * r).collect();
            let div = derivative_values(&flux, rho_star.h());
            div.iter().zip(&jump).map(|(d, j)| -d - lambda * j).collect()
        }
        Generator::Potential(v) => {
            rho_star.ensure_same_grid(v)?;
            let root_tail = match tail {
                TailModel::PowerLaw(p) => TailModel::PowerLaw(0.5 * p),
                other => other,
            };
            let op = PvOperator::for_grid(rho_star, mu, root_tail)?;
            let root: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
            let jump = op.apply_values(&root)?;
            (0..rho.len()).map(|i| -lambda * root[i] * jump[i] - v.values()[i] * rho[i]).collect()
        }
    };
    rho_star.with_values(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    Lie,
    Strang,
    /// Unsplit: exact transport of the density plus the jump source
    /// integrated along characteristics (predictor–corrector in time).
    Characteristic,
}

impl fmt::Display for Splitting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Splitting::Lie => "lie",
            Splitting::Strang => "strang",
            Splitting::Characteristic => "characteristic",
        })
    }
}

impl FromStr for Splitting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lie" => Ok(Splitting::Lie),
            "strang" => Ok(Splitting::Strang),
            "characteristic" => Ok(Splitting::Characteristic),
            other => Err(invalid(format!("unknown splitting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    SemiLagrangian,
    Upwind,
}

impl FromStr for Advection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi_lagrangian" | "sl" => Ok(Advection::SemiLagrangian),
            "upwind" => Ok(Advection::Upwind),
            other => Err(invalid(format!("unknown advection scheme '{other}'"))),
        }
    }
}

/// What happens to jumps that would leave the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outside {
    /// Suppressed (censored process); conserves mass.
    Censor,
    /// Deposited in the edge cell on that side; conserves mass. Appropriate
    /// when a confining drift returns escaped mass quickly.
    Reinject,
    /// Full operator with a power-law continuation beyond the window; mass
    /// leaves the window.
    Tail(f64),
}

impl fmt::Display for Outside {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outside::Censor => f.write_str("censor"),
            Outside::Reinject => f.write_str("reinject"),
            Outside::Tail(p) => write!(f, "tail:{p}"),
        }
    }
}

impl FromStr for Outside {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "censor" => Ok(Outside::Censor),
            "reinject" => Ok(Outside::Reinject),
            _ => match s.strip_prefix("tail:") {
                Some(p) => p
                    .parse()
                    .map(Outside::Tail)
                    .map_err(|_| invalid(format!("bad tail exponent in '{s}'"))),
                None => Err(invalid(format!("unknown outside treatment '{s}'"))),
            },
        }
    }
}

/// Negative mass per step tolerated (and clipped when enabled).
pub const CLIP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_final: f64,
    pub mu: f64,
    pub lambda: f64,
    pub splitting: Splitting,
    pub advection: Advection,
    pub outside: Outside,
    pub positivity_clip: bool,
    pub snapshot_times: Vec<f64>,
}

impl SolveConfig {
    /// Window `[-50, 50]`, `h = 0.025`, `dt = 0.01`, characteristic stepping.
    pub fn new(mu: f64, lambda: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            grid: GridSpec::symmetric(50.0, 4001)?,
            dt: 0.01,
            t_final,
            mu,
            lambda,
            splitting: Splitting::Characteristic,
            advection: Advection::SemiLagrangian,
            outside: Outside::Reinject,
            positivity_clip: true,
            snapshot_times: vec![t_final],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(invalid(format!("stability index must lie in (0, 2), got {}", self.mu)));
        }
        if !(self.lambda > 0.0) || !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(invalid("need lambda > 0, dt > 0 and t_final >= 0"));
        }
        for &t in &self.snapshot_times {
            if !(t >= 0.0 && t <= self.t_final + 1e-9) {
                return Err(invalid(format!("snapshot time {t} outside [0, {}]", self.t_final)));
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One recorded state.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub rho: GridFunction,
    pub mass: f64,
    /// `h Σ x² ρ_i` plus the target's contribution beyond the window.
    pub variance: f64,
    pub l1_to_target: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub max_courant: f64,
    pub clipped_mass: f64,
    pub jump_substeps: usize,
    pub min_value: f64,
}

impl Trajectory {
    /// Columns `t,mass,variance,l1_to_target`.
    pub fn summary_csv(&self, header: &[String]) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        let _ = writeln!(s, "# columns: t,mass,variance,l1_to_target");
        for snap in &self.snapshots {
            let _ = writeln!(s, "{},{},{},{}", snap.t, snap.mass, snap.variance, snap.l1_to_target);
        }
        s
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Cauchy bump of the given width centred at `x0`, renormalized to unit
/// discrete mass.
pub fn cauchy_bump(spec: &GridSpec, x0: f64, width: f64) -> Result<GridFunction> {
    let g = spec.sample(|x| width / (std::f64::consts::PI * ((x - x0).powi(2) + width * width)))?;
    let m = g.values().iter().sum::<f64>() * spec.h();
    g.map(|_, v| v / m)
}

/// Jump part `dρ/dt` in gain/loss form with rates
/// `λ C_μ c_{|i-j|} exp(Φ_j - Φ_i)` from node `i` to node `j`.
struct JumpOperator {
    n: usize,
    scale: f64,
    conv: ToeplitzConv,
    /// `exp(Φ_i)`, or `None` for the unweighted case
    weight: Option<Vec<f64>>,
    /// total exchange rate out of node `i` (before the `λC` factor)
    loss: Vec<f64>,
    out_left: Vec<f64>,
    out_right: Vec<f64>,
    outside: Outside,
    tail_op: Option<PvOperator>,
    lambda: f64,
}

impl JumpOperator {
    fn new(spec: &GridSpec, mu: f64, lambda: f64, phi: Option<&[f64]>, outside: Outside) -> Result<Self> {
        let n = spec.n;
        let h = spec.h();
        let w = exchange_weights(n, h, mu);
        let conv = ToeplitzConv::new(&w);
        let weight: Option<Vec<f64>> = phi.map(|p| {
            let m = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            p.iter().map(|v| (v - m).exp()).collect()
        });
        let loss = match &weight {
            None => {
                let ones = vec![1.0; n];
                conv.apply(&ones)
            }
            Some(e) => {
                let c = conv.apply(e);
                c.iter().zip(e).map(|(c, e)| c / e).collect()
            }
        };
        let xs: Vec<f64> = (0..n).map(|i| spec.x(i)).collect();
        let out_left = xs.iter().map(|x| (x - spec.x_min + 0.5 * h).powf(-mu) / mu).collect();
        let out_right = xs.iter().map(|x| (spec.x_max + 0.5 * h - x).powf(-mu) / mu).collect();
        let tail_op = match outside {
            Outside::Tail(p) => {
                if weight.is_some() {
                    return Err(invalid("power-law outside treatment applies only without a potential"));
                }
                Some(PvOperator::new(spec.x_min, spec.x_max, n, mu, TailModel::PowerLaw(p))?)
            }
            _ => None,
        };
        if weight.is_some() && outside == Outside::Reinject {
            return Err(invalid("reinjection applies only to the drift-driven equation"));
        }
        Ok(Self { n, scale: lambda * riesz_constant(mu), conv, weight, loss, out_left, out_right, outside, tail_op, lambda })
    }

    /// Largest total rate out of any node.
    fn max_rate(&self) -> f64 {
        let extra = match self.outside {
            Outside::Censor => 0.0,
            _ => self.out_left[0].max(self.out_right[0]),
        };
        self.scale * (self.loss.iter().cloned().fold(0.0, f64::max) + extra)
    }

    fn rhs(&self, rho: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some(op) = &self.tail_op {
            let g = op.apply_values(rho)?;
            for (o, g) in out.iter_mut().zip(g) {
                *o = -self.lambda * g;
            }
            return Ok(());
        }
        match &self.weight {
            None => {
                let c = self.conv.apply(rho);
                for i in 0..self.n {
                    out[i] = self.scale * (c[i] - rho[i] * self.loss[i]);
                }
            }
            Some(e) => {
                let u: Vec<f64> = rho.iter().zip(e).map(|(r, e)| r / e).collect();
                let c = self.conv.apply(&u);
                for i in 0..self.n {
                    out[i] = self.scale * (e[i] * c[i] - rho[i] * self.loss[i]);
                }
            }
        }
        if self.outside == Outside::Reinject {
            let (mut to_left, mut to_right) = (0.0, 0.0);
            for i in 0..self.n {
                let l = self.scale * rho[i] * self.out_left[i];
                let r = self.scale * rho[i] * self.out_right[i];
                out[i] -= l + r;
                to_left += l;
                to_right += r;
            }
            out[0] += to_left;
            out[self.n - 1] += to_right;
        }
        Ok(())
    }

    /// Per-node total exit rate, when the operator splits into a nonnegative
    /// gain and a linear loss `-r ρ`.
    fn exit_rate(&self) -> Option<Vec<f64>> {
        if self.tail_op.is_some() {
            return None;
        }
        Some(
            (0..self.n)
                .map(|i| {
                    let out = if self.outside == Outside::Reinject { self.out_left[i] + self.out_right[i] } else { 0.0 };
                    self.scale * (self.loss[i] + out)
                })
                .collect(),
        )
    }

    /// The gain part matching [`exit_rate`](Self::exit_rate), without the
    /// reinjected outflow, which is returned as `(left, right)` rates.
    fn gain(&self, rho: &[f64], out: &mut [f64]) -> (f64, f64) {
        match &self.weight {
            None => {
                let c = self.conv.apply(rho);
                for i in 0..self.n {
                    out[i] = self.scale * c[i];
                }
            }
            Some(e) => {
                let u: Vec<f64> = rho.iter().zip(e).map(|(r, e)| r / e).collect();
                let c = self.conv.apply(&u);
                for i in 0..self.n {
                    out[i] = self.scale * e[i] * c[i];
                }
            }
        }
        if self.outside == Outside::Reinject {
            let (mut to_left, mut to_right) = (0.0, 0.0);
            for i in 0..self.n {
                to_left += self.scale * rho[i] * self.out_left[i];
                to_right += self.scale * rho[i] * self.out_right[i];
            }
            return (to_left, to_right);
        }
        (0.0, 0.0)
    }

    /// SSPRK3 over `dt` in `substeps` equal pieces.
    fn advance(&self, rho: &mut [f64], dt: f64, substeps: usize) -> Result<()> {
        let n = self.n;
        let tau = dt / substeps as f64;
        let mut k = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        for _ in 0..substeps {
            self.rhs(rho, &mut k)?;
            for i in 0..n {
                u1[i] = rho[i] + tau * k[i];
            }
            self.rhs(&u1, &mut k)?;
            for i in 0..n {
                u2[i] = 0.75 * rho[i] + 0.25 * (u1[i] + tau * k[i]);
            }
            self.rhs(&u2, &mut k)?;
            for i in 0..n {
                rho[i] = rho[i] / 3.0 + 2.0 / 3.0 * (u2[i] + tau * k[i]);
            }
        }
        Ok(())
    }
}

/// Catmull–Rom interpolation of node values, linear continuation outside.
fn cubic_at(values: &[f64], spec: &GridSpec, x: f64) -> f64 {
    let n = values.len();
    let h = spec.h();
    let s = (x - spec.x_min) / h;
    if s <= 1.0 || s >= (n - 2) as f64 {
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        let t = s - i as f64;
        return values[i] + t * (values[i + 1] - values[i]);
    }
    let i = s.floor() as usize;
    let t = s - i as f64;
    let (p0, p1, p2, p3) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
    p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
}

/// Flux-form semi-Lagrangian remap for `∂ρ + ∂(bρ) = 0`.
struct Remap {
    h: f64,
    wall_lo: f64,
    /// foot of each of the `n + 1` cell faces, clamped to the walls
    feet: Vec<f64>,
    /// backward travel time from each face to the wall it reaches (`-1` left,
    /// `+1` right) within `tau`, or `None`
    wall_hits: Vec<Option<(i8, f64)>>,
}

impl Remap {
    fn new(b: &[f64], spec: &GridSpec, tau: f64) -> Self {
        let n = spec.n;
        let h = spec.h();
        let wall_lo = spec.x_min - 0.5 * h;
        let wall_hi = spec.x_max + 0.5 * h;
        let slope_max = derivative_values(b, h).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let vel = |x: f64| cubic_at(b, spec, x);
        let mut wall_hits = vec![None; n + 1];
        wall_hits[0] = Some((-1, 0.0));
        wall_hits[n] = Some((1, 0.0));
        let feet = (0..=n)
            .map(|k| {
                let x0 = wall_lo + k as f64 * h;
                if k == 0 || k == n {
                    return x0;
                }
                // RK4 backward along the characteristic, stopping at the walls
                let sub = ((tau * slope_max / 0.05).ceil() as usize).clamp(1, 100_000);
                let ds = tau / sub as f64;
                let mut x = x0;
                for step in 0..sub {
                    let k1 = -vel(x);
                    let k2 = -vel(x + 0.5 * ds * k1);
                    let k3 = -vel(x + 0.5 * ds * k2);
                    let k4 = -vel(x + ds * k3);
                    let prev = x;
                    x += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    if !(x > wall_lo && x < wall_hi) {
                        let (side, wall) = if x <= wall_lo { (-1, wall_lo) } else { (1, wall_hi) };
                        let frac = if x.is_finite() { ((prev - wall) / (prev - x)).clamp(0.0, 1.0) } else { 0.0 };
                        wall_hits[k] = Some((side, (step as f64 + frac) * ds));
                        break;
                    }
                }
                if x.is_nan() {
                    x0
                } else {
                    x.clamp(wall_lo, wall_hi)
                }
            })
            .collect();
        // replace the hit times by the travel time ∫ dy / |b| from the wall,
        // which is smooth across faces
        let travel = |a: f64, c: f64| {
            let m = 0.5 * (a + c);
            (c - a) / 6.0 * (1.0 / vel(a) + 4.0 / vel(m) + 1.0 / vel(c))
        };
        let mut t_left = 0.0;
        for k in 1..=n {
            let (a, c) = (wall_lo + (k - 1) as f64 * h, wall_lo + k as f64 * h);
            t_left = if vel(a) > 0.0 && vel(c) > 0.0 && vel(0.5 * (a + c)) > 0.0 { t_left + travel(a, c) } else { f64::INFINITY };
            if let Some((-1, t)) = wall_hits[k] {
                wall_hits[k] = Some((-1, if t_left.is_finite() { t_left.min(tau) } else { t }));
            }
        }
        let mut t_right = 0.0;
        for k in (0..n).rev() {
            let (a, c) = (wall_lo + k as f64 * h, wall_lo + (k + 1) as f64 * h);
            t_right = if vel(a) < 0.0 && vel(c) < 0.0 && vel(0.5 * (a + c)) < 0.0 { t_right - travel(a, c) } else { f64::INFINITY };
            if let Some((1, t)) = wall_hits[k] {
                wall_hits[k] = Some((1, if t_right.is_finite() { t_right.min(tau) } else { t }));
            }
        }
        Self { h, wall_lo, feet, wall_hits }
    }

    fn max_courant(&self) -> f64 {
        self.feet
            .iter()
            .enumerate()
            .map(|(k, f)| ((self.wall_lo + k as f64 * self.h) - f).abs() / self.h)
            .fold(0.0, f64::max)
    }

    /// Cell averages of `values` over the upstream intervals of each cell.
    fn transported(&self, values: &[f64]) -> Vec<f64> {
        let m = cumulative_at(values, self.h, self.wall_lo, &self.feet);
        m.windows(2).map(|w| (w[1] - w[0]) / self.h).collect()
    }

    /// Transport of node values: converted to cell averages, remapped, and
    /// converted back, so the scheme is fourth-order consistent with point
    /// samples.
    fn transported_nodes(&self, values: &[f64]) -> Vec<f64> {
        let avg = node_to_average(values);
        let mut out = self.transported(&avg);
        average_to_node(&mut out);
        out
    }

    fn apply(&self, rho: &mut [f64]) {
        let out = self.transported(rho);
        rho.copy_from_slice(&out);
    }
}

/// `ā_i = a_i + (a_{i-1} - 2a_i + a_{i+1}) / 24`, left unchanged where it would
/// turn negative.
fn node_to_average(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = values.to_vec();
    for i in 1..n - 1 {
        let v = values[i] + (values[i - 1] - 2.0 * values[i] + values[i + 1]) / 24.0;
        if v >= 0.0 {
            out[i] = v;
        }
    }
    out
}

/// Inverse of [`node_to_average`] to the same order.
fn average_to_node(values: &mut [f64]) {
    let n = values.len();
    let src = values.to_vec();
    for i in 1..n - 1 {
        let v = src[i] - (src[i - 1] - 2.0 * src[i] + src[i + 1]) / 24.0;
        if v >= 0.0 {
            values[i] = v;
        }
    }
}

/// `exp(-∫_0^tau r(X(σ)) dσ)` along the backward characteristic from each
/// cell centre, with the integration stopped at the walls.
fn path_damping(b: &[f64], spec: &GridSpec, tau: f64, rate: &[f64]) -> Vec<f64> {
    let h = spec.h();
    let wall_lo = spec.x_min - 0.5 * h;
    let wall_hi = spec.x_max + 0.5 * h;
    let slope_max = derivative_values(b, h).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sub = ((tau * slope_max / 0.05).ceil() as usize).clamp(1, 100_000);
    let ds = tau / sub as f64;
    let f = |x: f64| (-cubic_at(b, spec, x), linear_at(rate, spec, x));
    (0..spec.n)
        .map(|i| {
            let (mut x, mut acc) = (spec.x(i), 0.0);
            for _ in 0..sub {
                let (v1, r1) = f(x);
                let (v2, r2) = f(x + 0.5 * ds * v1);
                let (v3, r3) = f(x + 0.5 * ds * v2);
                let (v4, r4) = f(x + ds * v3);
                x += ds / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
                acc += ds / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
                if !(x > wall_lo && x < wall_hi) {
                    break;
                }
            }
            (-acc).exp()
        })
        .collect()
}

/// Piecewise-linear interpolation of node values, constant beyond the ends.
fn linear_at(values: &[f64], spec: &GridSpec, x: f64) -> f64 {
    let s = ((x - spec.x_min) / spec.h()).clamp(0.0, (spec.n - 1) as f64);
    let j = (s.floor() as usize).min(spec.n - 2);
    let t = s - j as f64;
    values[j] * (1.0 - t) + values[j + 1] * t
}

/// Cumulative integral from the left wall of `values` (nonnegative cell
/// averages), evaluated at each point of `at`. The cumulative mass is
/// interpolated by monotone cubic Hermite pieces between faces, with fourth-order
/// face values bounded by the Fritsch–Carlson condition, so transported cell
/// masses stay nonnegative and smooth extrema are not clipped.
fn cumulative_at(values: &[f64], h: f64, wall_lo: f64, at: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + h * values[j];
    }
    // density at face k, between cells k-1 and k
    let mut face = vec![0.0; n + 1];
    for k in 1..n {
        let (l, r) = (values[k - 1], values[k]);
        let d = if k >= 2 && k + 1 < n {
            (7.0 * (l + r) - values[k - 2] - values[k + 1]) / 12.0
        } else {
            0.5 * (l + r)
        };
        face[k] = d.clamp(0.0, 3.0 * l.min(r).max(0.0));
    }
    at.iter()
        .map(|&y| {
            let s = (y - wall_lo) / h;
            if s <= 0.0 {
                return 0.0;
            }
            if s >= n as f64 {
                return prefix[n];
            }
            let j = s.floor() as usize;
            let t = s - j as f64;
            let t2 = t * t;
            let t3 = t2 * t;
            prefix[j] + h * ((3.0 * t2 - 2.0 * t3) * values[j] + (t3 - 2.0 * t2 + t) * face[j] + (t3 - t2) * face[j + 1])
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

/// Unsplit step along characteristics. The exit rate `r` is integrated as a
/// damping factor and the gain `G` as a source:
/// `ρ^{n+1} = D_dt T_dt ρ^n + ∫_0^dt D_s T_s G(t_{n+1} - s) ds`
/// with `D_s` the exit-rate damping accumulated along the characteristic,
/// `T_s` exact transport over time `s`, and `G` interpolated linearly in time
/// between the start of the step and a predictor. Every term is nonnegative.
///
/// The source integral is evaluated per face, as the time integral of the
/// cumulative gain at the face's foot. Each face integrates only up to the
/// time its backward characteristic reaches a wall, where the integrand has a
/// kink, so the Gauss rule stays accurate in the fast outer region.
struct Characteristic {
    full: Remap,
    damp_full: Vec<f64>,
    rate: Vec<f64>,
    /// `GAUSS_NODES` foot positions per face
    face_feet: Vec<f64>,
    /// quadrature weight times damping per face node
    face_weight: Vec<f64>,
    /// `s / dt` per face node
    face_frac: Vec<f64>,
}

const GAUSS_NODES: usize = GAUSS5.len();

impl Characteristic {
    fn new(b: &[f64], spec: &GridSpec, dt: f64, rate: &[f64]) -> Self {
        let full = Remap::new(b, spec, dt);
        let n = spec.n;
        let h = spec.h();
        let wall_lo = spec.x_min - 0.5 * h;
        let wall_hi = spec.x_max + 0.5 * h;
        let slope_max = derivative_values(b, h).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let ds_max = 0.05 / slope_max.max(1e-12);
        let f = |x: f64| (-cubic_at(b, spec, x), linear_at(rate, spec, x));
        let mut face_feet = vec![0.0; (n + 1) * GAUSS_NODES];
        let mut face_weight = vec![0.0; (n + 1) * GAUSS_NODES];
        let mut face_frac = vec![0.0; (n + 1) * GAUSS_NODES];
        for k in 0..=n {
            let x0 = wall_lo + k as f64 * h;
            let horizon = match full.wall_hits[k] {
                Some((_, t)) => t.min(dt),
                None => dt,
            };
            let (mut x, mut acc, mut s) = (x0, 0.0, 0.0);
            for (j, (fr, w)) in GAUSS5.iter().enumerate() {
                let target = fr * horizon;
                // RK4 for (position, accumulated exit rate) up to the next node
                let sub = ((target - s) / ds_max).ceil().max(1.0) as usize;
                let step = (target - s) / sub as f64;
                for _ in 0..sub {
                    if !(x > wall_lo && x < wall_hi) {
                        break;
                    }
                    let (v1, r1) = f(x);
                    let (v2, r2) = f(x + 0.5 * step * v1);
                    let (v3, r3) = f(x + 0.5 * step * v2);
                    let (v4, r4) = f(x + step * v3);
                    x += step / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
                    acc += step / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
                }
                s = target;
                let idx = k * GAUSS_NODES + j;
                face_feet[idx] = if x.is_finite() { x.clamp(wall_lo, wall_hi) } else { x0 };
                face_weight[idx] = w * horizon * (-acc).exp();
                face_frac[idx] = target / dt;
            }
        }
        Self { full, damp_full: path_damping(b, spec, dt, rate), rate: rate.to_vec(), face_feet, face_weight, face_frac }
    }

    /// `∫_0^dt D_s T_s G ds` with `G` moving linearly from `g0` (at `t_n`) to
    /// `g1` (at `t_{n+1}`). Cumulative masses are measured from the nearer
    /// wall so the per-face damping only weighs small masses where it varies.
    fn source(&self, g0: &[f64], g1: &[f64]) -> Vec<f64> {
        let n = g0.len();
        let h = self.full.h;
        let wall_lo = self.full.wall_lo;
        let a0 = node_to_average(g0);
        let a1 = node_to_average(g1);
        let m0 = cumulative_at(&a0, h, wall_lo, &self.face_feet);
        let m1 = cumulative_at(&a1, h, wall_lo, &self.face_feet);
        let tot0: f64 = a0.iter().sum::<f64>() * h;
        let tot1: f64 = a1.iter().sum::<f64>() * h;
        let q = |k: usize, right: bool| -> f64 {
            (0..GAUSS_NODES)
                .map(|j| {
                    let idx = k * GAUSS_NODES + j;
                    let fr = self.face_frac[idx];
                    let (c0, c1) = if right { (tot0 - m0[idx], tot1 - m1[idx]) } else { (m0[idx], m1[idx]) };
                    self.face_weight[idx] * (fr * c0 + (1.0 - fr) * c1)
                })
                .sum()
        };
        let half = n / 2;
        let mut out: Vec<f64> = (0..n)
            .map(|i| if i < half { (q(i + 1, false) - q(i, false)) / h } else { (q(i, true) - q(i + 1, true)) / h })
            .collect();
        average_to_node(&mut out);
        for v in out.iter_mut() {
            *v = v.max(0.0);
        }
        out
    }

    fn step(&self, rho: &mut [f64], jump: &JumpOperator, dt: f64) {
        let n = rho.len();
        let mut base = self.full.transported_nodes(rho);
        for (o, d) in base.iter_mut().zip(&self.damp_full) {
            *o *= d;
        }
        let mut g0 = vec![0.0; n];
        let out0 = jump.gain(rho, &mut g0);
        let src = self.source(&g0, &g0);
        let mut pred: Vec<f64> = base.iter().zip(&src).map(|(a, b)| a + b).collect();
        self.deposit(&mut pred, out0, out0, dt);
        let mut g1 = vec![0.0; n];
        let out1 = jump.gain(&pred, &mut g1);
        let mut gained = self.source(&g0, &g1);
        self.deposit(&mut gained, out0, out1, dt);
        // the gain must return exactly the mass the damping removed; the
        // quadratures match this only to ~1e-9 per step, so fix it here
        let before: f64 = rho.iter().sum();
        let kept: f64 = base.iter().sum();
        let added: f64 = gained.iter().sum();
        let scale = if added > 0.0 { ((before - kept) / added).max(0.0) } else { 1.0 };
        for i in 0..n {
            rho[i] = base[i] + scale * gained[i];
        }
    }

    /// Spreads the mass reinjected at the walls along the characteristics
    /// leaving them. Cell `i` receives what was emitted while the wall's
    /// forward trajectory crossed it; the emission rate is interpolated
    /// linearly from `start` (at `t_n`) to `end` (at `t_{n+1}`).
    fn deposit(&self, rho: &mut [f64], start: (f64, f64), end: (f64, f64), dt: f64) {
        let hits = &self.full.wall_hits;
        let emitted = |f0: f64, f1: f64, lo: f64, hi: f64| f1 * (hi - lo) + (f0 - f1) * (hi * hi - lo * lo) / (2.0 * dt);
        for i in 0..rho.len() {
            let window = |side: i8| -> Option<(f64, f64)> {
                let (a, b) = if side < 0 { (hits[i], hits[i + 1]) } else { (hits[i + 1], hits[i]) };
                let lo = match a {
                    Some((s, t)) if s == side => t,
                    _ => return None,
                };
                let hi = match b {
                    Some((s, t)) if s == side => t,
                    _ => dt,
                };
                (hi > lo).then_some((lo, hi))
            };
            for (side, f0, f1) in [(-1i8, start.0, end.0), (1, start.1, end.1)] {
                if f0 == 0.0 && f1 == 0.0 {
                    continue;
                }
                if let Some((lo, hi)) = window(side) {
                    let damp = (-self.rate[i] * 0.5 * (lo + hi)).exp();
                    // the outflow is a density rate of one cell, so mass per cell carries over as density
                    rho[i] += damp * emitted(f0, f1, lo, hi);
                }
            }
        }
    }
}

/// First-order upwind flux update with walls at the outer faces.
fn upwind_step(rho: &mut [f64], b_faces: &[f64], h: f64, dt: f64) {
    let n = rho.len();
    let mut flux = vec![0.0; n + 1];
    for k in 1..n {
        let b = b_faces[k];
        flux[k] = if b > 0.0 { b * rho[k - 1] } else { b * rho[k] };
    }
    for i in 0..n {
        rho[i] -= dt / h * (flux[i + 1] - flux[i]);
    }
}

enum Advector {
    None,
    Remap { half: Remap, full: Remap },
    Characteristic(Characteristic),
    Upwind { b_faces: Vec<f64> },
}

struct Stepper {
    jump: JumpOperator,
    advect: Advector,
    substeps: usize,
    clipped: f64,
    min_value: f64,
}

impl Stepper {
    fn step(&mut self, rho: &mut [f64], cfg: &SolveConfig) -> Result<()> {
        let dt = cfg.dt;
        match (&self.advect, cfg.splitting) {
            (Advector::None, _) => self.jump.advance(rho, dt, self.substeps)?,
            (Advector::Characteristic(c), _) => c.step(rho, &self.jump, dt),
            (Advector::Remap { half, .. }, Splitting::Strang) => {
                half.apply(rho);
                self.jump.advance(rho, dt, self.substeps)?;
                half.apply(rho);
            }
            (Advector::Remap { full, .. }, Splitting::Lie) => {
                full.apply(rho);
                self.jump.advance(rho, dt, self.substeps)?;
            }
            (Advector::Remap { half, .. }, Splitting::Characteristic) => {
                half.apply(rho);
                self.jump.advance(rho, dt, self.substeps)?;
                half.apply(rho);
            }
            (Advector::Upwind { b_faces }, Splitting::Strang | Splitting::Characteristic) => {
                upwind_step(rho, b_faces, cfg.grid.h(), 0.5 * dt);
                self.jump.advance(rho, dt, self.substeps)?;
                upwind_step(rho, b_faces, cfg.grid.h(), 0.5 * dt);
            }
            (Advector::Upwind { b_faces }, Splitting::Lie) => {
                upwind_step(rho, b_faces, cfg.grid.h(), dt);
                self.jump.advance(rho, dt, self.substeps)?;
            }
        }
        let h = cfg.grid.h();
        let neg: f64 = rho.iter().filter(|v| **v < 0.0).map(|v| -v * h).sum();
        let lowest = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        self.min_value = self.min_value.min(lowest);
        if !lowest.is_finite() {
            return Err(Error::NonFinite("transport solution".into()));
        }
        if neg > CLIP_TOLERANCE {
            return Err(Error::NegativeMass { mass: neg });
        }
        if cfg.positivity_clip && neg > 0.0 {
            self.clipped += neg;
            for v in rho.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(())
    }
}

fn tail_second_moment(target: Option<&TargetDensity>, spec: &GridSpec) -> f64 {
    let Some(t) = target else { return 0.0 };
    let h = spec.h();
    let (lo, hi) = (spec.x_min - 0.5 * h, spec.x_max + 0.5 * h);
    let right = match t.tail_exponent() {
        Some(p) if p > 3.0 => {
            let a = t.density(hi) * hi.powf(p);
            a * hi.powf(3.0 - p) / (p - 3.0)
        }
        Some(_) => f64::INFINITY,
        None => 0.0,
    };
    let left = match t.tail_exponent() {
        Some(p) if p > 3.0 => {
            let a = t.density(lo) * lo.abs().powf(p);
            a * lo.abs().powf(3.0 - p) / (p - 3.0)
        }
        Some(_) => f64::INFINITY,
        None => 0.0,
    };
    left + right
}

fn run(
    rho0: &GridFunction,
    cfg: &SolveConfig,
    mut stepper: Stepper,
    target: Option<&TargetDensity>,
    max_courant: f64,
) -> Result<Trajectory> {
    let spec = cfg.grid;
    if rho0.spec() != spec {
        return Err(Error::GridMismatch("initial density is not on the solver grid".into()));
    }
    if rho0.values().iter().any(|v| *v < 0.0) {
        return Err(invalid("initial density has negative values"));
    }
    let h = spec.h();
    let star: Option<Vec<f64>> = target.map(|t| (0..spec.n).map(|i| t.density(spec.x(i))).collect());
    let tail_m2 = tail_second_moment(target, &spec);
    let record = |t: f64, rho: &[f64]| -> Result<Snapshot> {
        let mass = rho.iter().sum::<f64>() * h;
        let variance = (0..spec.n).map(|i| spec.x(i).powi(2) * rho[i]).sum::<f64>() * h + tail_m2;
        let l1 = match &star {
            Some(s) => rho.iter().zip(s).map(|(a, b)| (a - b).abs()).sum::<f64>() * h,
            None => f64::NAN,
        };
        Ok(Snapshot { t, rho: rho0.with_values(rho.to_vec())?, mass, variance, l1_to_target: l1 })
    };
    let steps = cfg.steps();
    let snap_steps: Vec<usize> = cfg.snapshot_times.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    let mut rho = rho0.values().to_vec();
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    for k in 0..=steps {
        for (s, &ks) in snap_steps.iter().enumerate() {
            if ks == k {
                snapshots.push(record(k as f64 * cfg.dt, &rho)?);
                let _ = s;
            }
        }
        if k == steps {
            break;
        }
        stepper.step(&mut rho, cfg)?;
    }
    Ok(Trajectory {
        snapshots,
        max_courant,
        clipped_mass: stepper.clipped,
        jump_substeps: stepper.substeps,
        min_value: stepper.min_value,
    })
}

fn substeps_for(jump: &JumpOperator, dt: f64) -> usize {
    // forward-Euler positivity bound of the SSP stages
    ((dt * jump.max_rate()).ceil() as usize).max(1)
}

/// `∂ρ = -∂(bρ) - λ|Δ|^{μ/2}ρ`. `target` (optional) supplies the reference for
/// the L¹ distance and the variance tail beyond the window.
pub fn evolve_langevin_fpe(
    rho0: &GridFunction,
    b: &GridFunction,
    cfg: &SolveConfig,
    target: Option<&TargetDensity>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if b.spec() != cfg.grid {
        return Err(Error::GridMismatch("drift is not on the solver grid".into()));
    }
    let spec = cfg.grid;
    let jump = JumpOperator::new(&spec, cfg.mu, cfg.lambda, None, cfg.outside)?;
    let substeps = substeps_for(&jump, cfg.dt);
    let zero = b.values().iter().all(|v| *v == 0.0);
    let (advect, courant) = if zero {
        (Advector::None, 0.0)
    } else {
        match cfg.advection {
            Advection::SemiLagrangian if cfg.splitting == Splitting::Characteristic && jump.exit_rate().is_some() => {
                let rate = jump.exit_rate().unwrap_or_default();
                let c = Characteristic::new(b.values(), &spec, cfg.dt, &rate);
                let courant = c.full.max_courant();
                (Advector::Characteristic(c), courant)
            }
            Advection::SemiLagrangian => {
                let half = Remap::new(b.values(), &spec, 0.5 * cfg.dt);
                let full = Remap::new(b.values(), &spec, cfg.dt);
                let c = full.max_courant();
                (Advector::Remap { half, full }, c)
            }
            Advection::Upwind => {
                let h = spec.h();
                let mut b_faces = vec![0.0; spec.n + 1];
                for (k, bf) in b_faces.iter_mut().enumerate().take(spec.n).skip(1) {
                    *bf = cubic_at(b.values(), &spec, spec.x_min + (k as f64 - 0.5) * h);
                }
                let courant = b_faces.iter().map(|v| v.abs()).fold(0.0, f64::max) * cfg.dt / h;
                if courant > 0.5 {
                    return Err(Error::Cfl { courant, limit: 0.5 });
                }
                (Advector::Upwind { b_faces }, courant)
            }
        }
    };
    let stepper = Stepper { jump, advect, substeps, clipped: 0.0, min_value: f64::INFINITY };
    run(rho0, cfg, stepper, target, courant)
}

/// Master equation with rates `λ C_μ exp[Φ(z) - Φ(x)] / |z - x|^{1+μ}` for a
/// given `Φ` on the solver grid. Jumps leaving the window are censored.
pub fn evolve_master_equation(
    rho0: &GridFunction,
    phi: &[f64],
    cfg: &SolveConfig,
    target: Option<&TargetDensity>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if phi.len() != cfg.grid.n {
        return Err(Error::GridMismatch("Φ is not on the solver grid".into()));
    }
    let outside = match cfg.outside {
        Outside::Reinject => Outside::Censor,
        other => other,
    };
    let jump = JumpOperator::new(&cfg.grid, cfg.mu, cfg.lambda, Some(phi), outside)?;
    let substeps = substeps_for(&jump, cfg.dt);
    let stepper = Stepper { jump, advect: Advector::None, substeps, clipped: 0.0, min_value: f64::INFINITY };
    run(rho0, cfg, stepper, target, 0.0)
}

/// Semigroup dynamics relaxing to `target`.
pub fn evolve_semigroup_fpe(rho0: &GridFunction, target: &TargetDensity, cfg: &SolveConfig) -> Result<Trajectory> {
    let phi: Vec<f64> = (0..cfg.grid.n).map(|i| target.phi(cfg.grid.x(i))).collect();
    evolve_master_equation(rho0, &phi, cfg, Some(target))
}

/// Right-hand side of the semigroup equation in gain/loss form on the window
/// (censored), for comparison with [`composite_form_rhs`].
pub fn master_form_rhs(rho: &GridFunction, phi: &[f64], mu: f64, lambda: f64) -> Result<GridFunction> {
    let jump = JumpOperator::new(&rho.spec(), mu, lambda, Some(phi), Outside::Censor)?;
    let mut out = vec![0.0; rho.len()];
    jump.rhs(rho.values(), &mut out)?;
    rho.with_values(out)
}

/// `-λ e^{Φ} L[e^{-Φ} ρ] - 𝒱ρ` with `𝒱 = -λ L[e^{Φ}] / e^{Φ}`, where `L` is the
/// same censored discretization of `|Δ|^{μ/2}` used by the master form.
pub fn composite_form_rhs(rho: &GridFunction, phi: &[f64], mu: f64, lambda: f64) -> Result<GridFunction> {
    let spec = rho.spec();
    let lap = JumpOperator::new(&spec, mu, 1.0, None, Outside::Censor)?;
    let apply = |f: &[f64]| -> Result<Vec<f64>> {
        let mut out = vec![0.0; f.len()];
        lap.rhs(f, &mut out)?;
        // rhs is -L f for unit intensity
        Ok(out.into_iter().map(|v| -v).collect())
    };
    let m = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: Vec<f64> = phi.iter().map(|p| (p - m).exp()).collect();
    let u: Vec<f64> = rho.values().iter().zip(&s).map(|(r, s)| r / s).collect();
    let lu = apply(&u)?;
    let ls = apply(&s)?;
    let out = (0..spec.n)
        .map(|i| {
            let v = -lambda * ls[i] / s[i];
            -lambda * s[i] * lu[i] - v * rho.values()[i]
        })
        .collect();
    rho.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remap_conserves_mass_and_positivity() {
        let spec = GridSpec::symmetric(5.0, 201).unwrap();
        let b: Vec<f64> = (0..spec.n).map(|i| -spec.x(i).powi(3)).collect();
        let remap = Remap::new(&b, &spec, 0.3);
        let mut rho: Vec<f64> = (0..spec.n).map(|i| (-(spec.x(i) - 1.0).powi(2)).exp()).collect();
        let m0: f64 = rho.iter().sum();
        for _ in 0..20 {
            remap.apply(&mut rho);
        }
        assert!((rho.iter().sum::<f64>() / m0 - 1.0).abs() < 1e-13);
        assert!(rho.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn node_transport_is_fourth_order() {
        let err = |n: usize| {
            let spec = GridSpec::symmetric(8.0, n).unwrap();
            let b: Vec<f64> = (0..n).map(|i| -spec.x(i)).collect();
            let f = |x: f64| (-x * x).exp();
            let rho: Vec<f64> = (0..n).map(|i| f(spec.x(i))).collect();
            let tau = 0.1;
            let out = Remap::new(&b, &spec, tau).transported_nodes(&rho);
            let e = tau.exp();
            (0..n).map(|i| (out[i] - f(spec.x(i) * e) * e).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(161), err(321));
        assert!(coarse / fine > 12.0, "{coarse} {fine}");
    }

    #[test]
    fn remap_translates_with_constant_velocity() {
        let spec = GridSpec::symmetric(10.0, 401).unwrap();
        let b = vec![1.0; spec.n];
        let remap = Remap::new(&b, &spec, 2.0 * spec.h());
        let mut rho: Vec<f64> = (0..spec.n).map(|i| (-spec.x(i).powi(2)).exp()).collect();
        let expect: Vec<f64> = rho.clone();
        remap.apply(&mut rho);
        for i in 2..spec.n {
            assert!((rho[i] - expect[i - 2]).abs() < 1e-13, "{i} {} {}", rho[i], expect[i - 2]);
        }
    }

    #[test]
    fn jump_operator_conserves_mass() {
        let spec = GridSpec::symmetric(10.0, 201).unwrap();
        let rho: Vec<f64> = (0..spec.n).map(|i| 1.0 / (1.0 + spec.x(i).powi(2))).collect();
        let phi: Vec<f64> = (0..spec.n).map(|i| -0.5 * (1.0 + spec.x(i).powi(2)).ln()).collect();
        for (p, outside) in [(None, Outside::Censor), (None, Outside::Reinject), (Some(&phi[..]), Outside::Censor)] {
            let op = JumpOperator::new(&spec, 1.0, 1.0, p, outside).unwrap();
            let mut out = vec![0.0; spec.n];
            op.rhs(&rho, &mut out).unwrap();
            assert!(out.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn outside_parses() {
        assert_eq!("tail:2".parse::<Outside>().unwrap(), Outside::Tail(2.0));
        assert!("tail:x".parse::<Outside>().is_err());
    }
}
