//! Catalog of stationary target densities with closed-form drift and potential
//! oracles where they exist.
//!
//! All Cauchy-type entries share the scaling law for the Cauchy driver: if the
//! unit-scale target has drift `b₁` and potential `𝒱₁`, the target of scale `s`
//! has drift `b₁(x/s)` and potential `𝒱₁(x/s)/s` at the same noise intensity.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::drift::Drift;
use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::quad::integrate;
use crate::rng::RngStream;

pub const DEFAULT_WINDOW: f64 = 200.0;

/// Names accepted by [`catalog_get`].
pub const CATALOG_NAMES: [&str; 6] = [
    "cauchy_ouc",
    "quadratic_cauchy",
    "cauchy_family",
    "cauchy_alpha4",
    "quartic_bimodal_base",
    "gibbs_gaussian",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Diverges,
}

impl Moment {
    pub fn value(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Diverges => None,
        }
    }
}

impl fmt::Display for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Diverges => f.write_str("diverges"),
        }
    }
}

#[derive(Debug, Clone)]
struct Tabulated {
    grid: GridFunction,
    ln_values: Vec<f64>,
    /// normalized cumulative mass at each node, including the left tail
    cum: Vec<f64>,
    tail_left: (f64, f64),
    tail_right: (f64, f64),
    norm: f64,
}

#[derive(Debug, Clone)]
enum Shape {
    /// `norm / s · (1 + (x/s)²)^(-alpha)`
    CauchyPower { alpha: f64, scale: f64, norm: f64 },
    /// `1 / (π s (1 - u² + u⁴))`, `u = x/s`
    QuarticBimodal { scale: f64 },
    Gaussian { sigma: f64 },
    Tabulated(Box<Tabulated>),
}

#[derive(Debug, Clone, Copy)]
enum Oracle {
    None,
    /// Cauchy-family target with a closed-form pair at this integer index.
    Cauchy { alpha: u8, scale: f64 },
    Quartic { scale: f64 },
    Gaussian { sigma2: f64 },
}

/// Numeric CDF for symmetric shapes without a closed form: cumulative mass on
/// `[0, window]` at a uniform step, refined inside a cell by Gauss–Legendre.
#[derive(Debug, Clone)]
struct CdfTable {
    h: f64,
    cum: Vec<f64>,
    /// `A` in the right tail `A x^(-p)`
    tail_amp: f64,
    tail_p: f64,
}

/// A normalized stationary density together with whatever closed-form oracles
/// are known for it.
#[derive(Debug, Clone)]
pub struct TargetDensity {
    name: String,
    params: BTreeMap<String, f64>,
    shape: Shape,
    oracle: Oracle,
    window: f64,
    intensity: f64,
    cdf_table: Option<CdfTable>,
}

const GL7_NODES: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_2,
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const GL7_WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

fn gauss7<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL7_NODES.iter().zip(GL7_WEIGHTS).map(|(t, w)| w * f(c + r * t)).sum::<f64>() * r
}

/// `∫₀^u (1+t²)^(-n) dt` by the reduction formula.
fn cauchy_power_primitive(n: u32, u: f64) -> f64 {
    let mut acc = u.atan();
    let q = 1.0 + u * u;
    for k in 2..=n {
        let kf = k as f64;
        acc = u / (2.0 * (kf - 1.0) * q.powi(k as i32 - 1)) + (2.0 * kf - 3.0) / (2.0 * kf - 2.0) * acc;
    }
    acc
}

fn cauchy_family_norm(alpha: f64) -> f64 {
    (ln_gamma(alpha) - ln_gamma(alpha - 0.5)).exp() / PI.sqrt()
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_keys(name: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if k != "window" && !allowed.contains(&k.as_str()) {
            return Err(invalid(format!("unknown parameter '{k}' for target {name}")));
        }
    }
    for (k, v) in params {
        if !v.is_finite() {
            return Err(invalid(format!("parameter {k} must be finite")));
        }
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{key} must be positive, got {v}")))
    }
}

/// Build a catalog entry. Unspecified parameters take unit defaults.
///
/// The noise intensity used by the oracles is carried as `lambda` (or `gamma`
/// for `cauchy_alpha4`); for `cauchy_ouc` the scale is `sigma = lambda/gamma`.
pub fn catalog_get(name: &str, params: &BTreeMap<String, f64>) -> Result<TargetDensity> {
    let window = positive("window", param(params, "window", DEFAULT_WINDOW))?;
    let (shape, oracle, intensity) = match name {
        "cauchy_ouc" => {
            check_keys(name, params, &["lambda", "gamma"])?;
            let lambda = positive("lambda", param(params, "lambda", 1.0))?;
            let gamma = positive("gamma", param(params, "gamma", 1.0))?;
            let scale = lambda / gamma;
            (
                Shape::CauchyPower { alpha: 1.0, scale, norm: 1.0 / PI },
                Oracle::Cauchy { alpha: 1, scale },
                lambda,
            )
        }
        "quadratic_cauchy" => {
            check_keys(name, params, &["lambda", "gamma"])?;
            let lambda = positive("lambda", param(params, "lambda", param(params, "gamma", 1.0)))?;
            (
                Shape::CauchyPower { alpha: 2.0, scale: 1.0, norm: 2.0 / PI },
                Oracle::Cauchy { alpha: 2, scale: 1.0 },
                lambda,
            )
        }
        "cauchy_alpha4" => {
            check_keys(name, params, &["lambda", "gamma"])?;
            let lambda = positive("gamma", param(params, "gamma", param(params, "lambda", 1.0)))?;
            (
                Shape::CauchyPower { alpha: 4.0, scale: 1.0, norm: 16.0 / (5.0 * PI) },
                Oracle::Cauchy { alpha: 4, scale: 1.0 },
                lambda,
            )
        }
        "cauchy_family" => {
            check_keys(name, params, &["alpha", "scale", "lambda"])?;
            let alpha = *params
                .get("alpha")
                .ok_or_else(|| invalid("cauchy_family requires parameter alpha"))?;
            if alpha <= 0.5 {
                return Err(invalid(format!(
                    "cauchy_family needs alpha > 1/2 for a normalizable density, got {alpha}"
                )));
            }
            let scale = positive("scale", param(params, "scale", 1.0))?;
            let lambda = positive("lambda", param(params, "lambda", 1.0))?;
            let oracle = if alpha == 1.0 || alpha == 2.0 || alpha == 4.0 {
                Oracle::Cauchy { alpha: alpha as u8, scale }
            } else {
                Oracle::None
            };
            (Shape::CauchyPower { alpha, scale, norm: cauchy_family_norm(alpha) }, oracle, lambda)
        }
        "quartic_bimodal_base" => {
            check_keys(name, params, &["lambda", "b"])?;
            let lambda = positive("lambda", param(params, "lambda", 1.0))?;
            let b = positive("b", param(params, "b", 0.25))?;
            // drift -4b x³ with noise lambda: scale (lambda / 4b)^(1/3)
            let scale = (lambda / (4.0 * b)).cbrt();
            (Shape::QuarticBimodal { scale }, Oracle::Quartic { scale }, lambda)
        }
        "gibbs_gaussian" => {
            check_keys(name, params, &["k", "kT", "D"])?;
            let k = positive("k", param(params, "k", 1.0))?;
            let kt = positive("kT", param(params, "kT", 1.0))?;
            let d = positive("D", param(params, "D", 1.0))?;
            let sigma2 = kt / k;
            (Shape::Gaussian { sigma: sigma2.sqrt() }, Oracle::Gaussian { sigma2 }, d)
        }
        other => return Err(Error::UnknownTarget(other.to_string())),
    };
    let mut t = TargetDensity {
        name: name.to_string(),
        params: params.clone(),
        shape,
        oracle,
        window,
        intensity,
        cdf_table: None,
    };
    t.build_cdf_table();
    Ok(t)
}

/// Parse a target description of `key = value` lines. `name` selects the
/// catalog entry; `table = path` ingests a two-column CSV instead, resolved
/// relative to `base_dir`.
pub fn parse_target_spec(text: &str, base_dir: &Path) -> Result<TargetDensity> {
    let mut name = None;
    let mut table = None;
    let mut params = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "name" => name = Some(v.to_string()),
            "table" => table = Some(v.to_string()),
            _ => {
                let val: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{v}'", lineno + 1)))?;
                params.insert(k.to_string(), val);
            }
        }
    }
    if let Some(path) = table {
        let path = base_dir.join(path);
        let text = std::fs::read_to_string(&path)?;
        let grid = GridFunction::from_csv(&text)?;
        let name = name.unwrap_or_else(|| "tabulated".into());
        return TargetDensity::from_table(&name, grid);
    }
    let name = name.ok_or_else(|| Error::Config("target spec lacks a name".into()))?;
    catalog_get(&name, &params)
}

/// Fit `A |x|^(-p)` from the density at the edge and at half the edge.
fn fit_tail(x_edge: f64, rho_edge: f64, x_half: f64, rho_half: f64) -> Result<(f64, f64)> {
    let p = -(rho_edge / rho_half).ln() / (x_edge.abs() / x_half.abs()).ln();
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Divergent(format!(
            "tabulated density decays with exponent {p} near x = {x_edge}; tail not integrable"
        )));
    }
    Ok((rho_edge * x_edge.abs().powf(p), p))
}

impl TargetDensity {
    /// User-defined target from a tabulated density on a uniform grid that
    /// straddles the origin. Tails beyond the table are power laws fitted at the
    /// edges; the result is renormalized. Only numeric oracles apply.
    pub fn from_table(name: &str, grid: GridFunction) -> Result<Self> {
        let n = grid.len();
        if grid.x_min() >= 0.0 || grid.x_max() <= 0.0 {
            return Err(invalid("tabulated density must straddle x = 0"));
        }
        for (i, &v) in grid.values().iter().enumerate() {
            if !(v > 1e-300) {
                return Err(Error::PositivityFloor { x: grid.x(i), value: v });
            }
        }
        let v = grid.values();
        let half_r = grid.nearest(0.5 * grid.x_max()).unwrap_or(n - 2);
        let half_l = grid.nearest(0.5 * grid.x_min()).unwrap_or(1);
        let tail_right = fit_tail(grid.x_max(), v[n - 1], grid.x(half_r), v[half_r])?;
        let tail_left = fit_tail(grid.x_min(), v[0], grid.x(half_l), v[half_l])?;
        let left_mass = tail_left.0 * grid.x_min().abs().powf(1.0 - tail_left.1) / (tail_left.1 - 1.0);
        let right_mass = tail_right.0 * grid.x_max().powf(1.0 - tail_right.1) / (tail_right.1 - 1.0);
        let h = grid.h();
        let mut cum = Vec::with_capacity(n);
        let mut acc = left_mass;
        cum.push(acc);
        for i in 1..n {
            acc += 0.5 * h * (v[i - 1] + v[i]);
            cum.push(acc);
        }
        let norm = acc + right_mass;
        for c in cum.iter_mut() {
            *c /= norm;
        }
        let ln_values = v.iter().map(|x| (x / norm).ln()).collect();
        let symmetric = (grid.x_min() + grid.x_max()).abs() < 1e-12 * grid.x_max()
            && (0..n / 2).all(|i| (v[i] - v[n - 1 - i]).abs() <= 1e-12 * v[i]);
        let mut params = BTreeMap::new();
        params.insert("symmetric".into(), if symmetric { 1.0 } else { 0.0 });
        let window = grid.x_max().max(-grid.x_min());
        Ok(TargetDensity {
            name: name.to_string(),
            params,
            shape: Shape::Tabulated(Box::new(Tabulated {
                grid,
                ln_values,
                cum,
                tail_left: (tail_left.0 / norm, tail_left.1),
                tail_right: (tail_right.0 / norm, tail_right.1),
                norm,
            })),
            oracle: Oracle::None,
            window,
            intensity: 1.0,
            cdf_table: None,
        })
    }

    fn build_cdf_table(&mut self) {
        let needs_table = match self.shape {
            Shape::CauchyPower { alpha, .. } => !(alpha.fract() == 0.0 && alpha <= 32.0),
            Shape::QuarticBimodal { .. } => true,
            _ => false,
        };
        if !needs_table {
            return;
        }
        let w = self.window;
        let cells = (w / 0.01).ceil() as usize;
        let h = w / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 0..cells {
            acc += gauss7(|x| self.density(x), k as f64 * h, (k + 1) as f64 * h);
            cum.push(acc);
        }
        let p = self.tail_exponent().unwrap_or(2.0);
        self.cdf_table = Some(CdfTable { h, cum, tail_amp: self.density(w) * w.powf(p), tail_p: p });
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Half-width of the window used for numeric work.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Noise intensity the oracles default to (`D` for the Gaussian entry).
    pub fn default_intensity(&self) -> f64 {
        self.intensity
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.shape {
            Shape::Tabulated(_) => self.params.get("symmetric") == Some(&1.0),
            _ => true,
        }
    }

    /// Characteristic length of the entry.
    pub fn scale(&self) -> f64 {
        match &self.shape {
            Shape::CauchyPower { scale, .. } | Shape::QuarticBimodal { scale } => *scale,
            Shape::Gaussian { sigma } => *sigma,
            Shape::Tabulated(t) => (t.grid.x_max() - t.grid.x_min()) / 20.0,
        }
    }

    /// Exponent `p` of the power-law decay `ρ ~ |x|^(-p)`; `None` for
    /// faster-than-polynomial decay. Tabulated entries report the smaller of
    /// the two fitted exponents.
    pub fn tail_exponent(&self) -> Option<f64> {
        match &self.shape {
            Shape::CauchyPower { alpha, .. } => Some(2.0 * alpha),
            Shape::QuarticBimodal { .. } => Some(4.0),
            Shape::Gaussian { .. } => None,
            Shape::Tabulated(t) => Some(t.tail_left.1.min(t.tail_right.1)),
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::CauchyPower { alpha, scale, norm } => {
                let u = x / scale;
                (norm / scale).ln() - alpha * (u * u).ln_1p()
            }
            Shape::QuarticBimodal { scale } => {
                let u2 = (x / scale).powi(2);
                -(PI * scale).ln() - (1.0 - u2 + u2 * u2).ln()
            }
            Shape::Gaussian { sigma } => {
                -0.5 * (x / sigma).powi(2) - (sigma * (2.0 * PI).sqrt()).ln()
            }
            Shape::Tabulated(t) => {
                let g = &t.grid;
                if x < g.x_min() {
                    (t.tail_left.0).ln() - t.tail_left.1 * x.abs().ln()
                } else if x > g.x_max() {
                    (t.tail_right.0).ln() - t.tail_right.1 * x.ln()
                } else {
                    let s = ((x - g.x_min()) / g.h()).floor().min((g.len() - 2) as f64) as usize;
                    let w = (x - g.x(s)) / g.h();
                    (1.0 - w) * t.ln_values[s] + w * t.ln_values[s + 1]
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::CauchyPower { alpha, scale, norm } => {
                let u = x / scale;
                norm / scale * (1.0 + u * u).powf(-alpha)
            }
            Shape::QuarticBimodal { scale } => {
                let u2 = (x / scale).powi(2);
                1.0 / (PI * scale * (1.0 - u2 + u2 * u2))
            }
            _ => self.ln_density(x).exp(),
        }
    }

    /// `Φ = ln ρ / 2`.
    pub fn phi(&self, x: f64) -> f64 {
        0.5 * self.ln_density(x)
    }

    /// `sup_x Φ(x)`.
    pub fn phi_max(&self) -> f64 {
        match &self.shape {
            Shape::QuarticBimodal { scale } => self.phi(scale / 2f64.sqrt()),
            Shape::Tabulated(t) => 0.5 * t.ln_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            _ => self.phi(0.0),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::CauchyPower { alpha, scale, norm } if self.cdf_table.is_none() => {
                let u = x / scale;
                if *alpha == 1.0 {
                    return 0.5 + u.atan() / PI;
                }
                (0.5 + norm * cauchy_power_primitive(*alpha as u32, u)).clamp(0.0, 1.0)
            }
            Shape::Gaussian { sigma } => 0.5 * erfc(-x / (sigma * 2f64.sqrt())),
            Shape::Tabulated(t) => {
                let g = &t.grid;
                let (al, pl) = t.tail_left;
                let (ar, pr) = t.tail_right;
                if x <= g.x_min() {
                    al * x.abs().powf(1.0 - pl) / (pl - 1.0)
                } else if x >= g.x_max() {
                    1.0 - ar * x.powf(1.0 - pr) / (pr - 1.0)
                } else {
                    let s = ((x - g.x_min()) / g.h()).floor().min((g.len() - 2) as f64) as usize;
                    let a = g.x(s);
                    let ra = g.values()[s] / t.norm;
                    let rb = g.values()[s + 1] / t.norm;
                    let w = x - a;
                    // trapezoid-consistent partial cell
                    t.cum[s] + w * ra + 0.5 * w * w * (rb - ra) / g.h()
                }
            }
            _ => {
                let tab = self.cdf_table.as_ref().expect("numeric CDF table");
                let ax = x.abs();
                let upper = if ax >= self.window {
                    tab.tail_amp * ax.powf(1.0 - tab.tail_p) / (tab.tail_p - 1.0)
                } else {
                    let k = ((ax / tab.h).floor() as usize).min(tab.cum.len() - 2);
                    let inner = tab.cum[k] + gauss7(|z| self.density(z), k as f64 * tab.h, ax);
                    (0.5 - inner).max(0.0)
                };
                if x >= 0.0 {
                    1.0 - upper
                } else {
                    upper
                }
            }
        }
    }

    /// Monotone bisection on the CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantile level must lie in (0,1), got {p}")));
        }
        if let Shape::CauchyPower { alpha, scale, .. } = self.shape {
            if alpha == 1.0 {
                return Ok(scale * (PI * (p - 0.5)).tan());
            }
        }
        let s = self.scale();
        let (mut lo, mut hi) = (-s, s);
        let mut guard = 0;
        while self.cdf(lo) > p {
            lo *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::NonFinite("quantile bracket".into()));
            }
        }
        while self.cdf(hi) < p {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::NonFinite("quantile bracket".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(s) {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exact inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform_open();
        self.quantile(u).unwrap_or(0.0)
    }

    /// Moment of the given order, or [`Moment::Diverges`] when the tail makes
    /// it infinite (`order ≥ p - 1` for decay `|x|^(-p)`).
    pub fn moment(&self, order: u32) -> Moment {
        let k = order as i32;
        if let Some(p) = self.tail_exponent() {
            if order as f64 >= p - 1.0 {
                return Moment::Diverges;
            }
        }
        if self.is_symmetric() && order % 2 == 1 {
            return Moment::Finite(0.0);
        }
        let w = match self.shape {
            Shape::Gaussian { sigma } => self.window.max(40.0 * sigma),
            _ => self.window,
        };
        let f = |x: f64| x.powi(k) * self.density(x);
        // geometric breakpoints resolve the core and the slowly decaying tail
        let mut pts = vec![0.0];
        let mut b = self.scale().min(1.0) / 8.0;
        while b < w {
            pts.push(b);
            b *= 2.0;
        }
        pts.push(w);
        let half = |sign: f64| -> f64 {
            pts.windows(2)
                .map(|ab| integrate(|x| f(sign * x), ab[0], ab[1], 1e-15, 1e-12).value)
                .sum()
        };
        let tail = |amp: f64, p: f64, edge: f64| amp * edge.powf(k as f64 + 1.0 - p) / (p - k as f64 - 1.0);
        let sign_k = if order % 2 == 0 { 1.0 } else { -1.0 };
        let (tail_r, tail_l) = match &self.shape {
            Shape::Gaussian { .. } => (0.0, 0.0),
            Shape::Tabulated(t) => {
                let (ar, pr) = t.tail_right;
                let (al, pl) = t.tail_left;
                (tail(ar, pr, w), sign_k * tail(al, pl, w))
            }
            _ => {
                // ρ ≈ x^{-p} (a + c / x²); a and c fitted at w and 2w
                let p = self.tail_exponent().unwrap();
                let r1 = self.density(w) * w.powf(p);
                let r2 = self.density(2.0 * w) * (2.0 * w).powf(p);
                let c = (r1 - r2) * w * w / 0.75;
                let a = r1 - c / (w * w);
                let t = tail(a, p, w) + tail(c, p + 2.0, w);
                (t, sign_k * t)
            }
        };
        let value = match &self.shape {
            Shape::Tabulated(t) => {
                // integrate exactly over the asymmetric table range
                let g = &t.grid;
                let inner = integrate(f, g.x_min(), g.x_max(), 1e-15, 1e-12).value;
                let el = g.x_min().abs();
                let er = g.x_max();
                inner
                    + tail(t.tail_right.0, t.tail_right.1, er)
                    + sign_k * tail(t.tail_left.0, t.tail_left.1, el)
            }
            _ => half(1.0) + half(-1.0) + tail_r + tail_l,
        };
        Moment::Finite(value)
    }

    /// Stationary variance if finite.
    pub fn variance(&self) -> Option<f64> {
        let m2 = self.moment(2).value()?;
        let m1 = self.moment(1).value().unwrap_or(0.0);
        Some(m2 - m1 * m1)
    }

    /// Sample the density on a grid.
    pub fn grid(&self, x_min: f64, x_max: f64, n: usize) -> Result<GridFunction> {
        GridFunction::from_fn(x_min, x_max, n, |x| self.density(x))
    }

    /// Closed-form Langevin drift for noise intensity `lambda` (the diffusion
    /// coefficient `D` for the Gaussian entry).
    pub fn oracle_drift(&self, lambda: f64) -> Option<Drift> {
        match self.oracle {
            Oracle::None => None,
            Oracle::Cauchy { alpha: 1, scale } => Some(Drift::Linear { gamma: lambda / scale }),
            Oracle::Cauchy { alpha: 2, scale } => {
                let (s, s3) = (scale, scale.powi(3));
                Some(Drift::Polynomial { coeffs: vec![0.0, -1.5 * lambda / s, 0.0, -0.5 * lambda / s3] })
            }
            Oracle::Cauchy { alpha: 4, scale } => {
                let c = |m: f64, k: i32| -m * lambda / (16.0 * scale.powi(k));
                Some(Drift::Polynomial {
                    coeffs: vec![0.0, c(35.0, 1), 0.0, c(35.0, 3), 0.0, c(21.0, 5), 0.0, c(5.0, 7)],
                })
            }
            Oracle::Cauchy { .. } => None,
            Oracle::Quartic { scale } => {
                Some(Drift::Polynomial { coeffs: vec![0.0, 0.0, 0.0, -lambda / scale.powi(3)] })
            }
            Oracle::Gaussian { sigma2 } => Some(Drift::Linear { gamma: lambda / sigma2 }),
        }
    }

    pub fn has_potential_oracle(&self) -> bool {
        matches!(self.oracle, Oracle::Cauchy { .. } | Oracle::Gaussian { .. })
    }

    /// Closed-form semigroup potential at `x` for noise intensity `lambda`.
    pub fn oracle_potential(&self, x: f64, lambda: f64) -> Option<f64> {
        match self.oracle {
            Oracle::Cauchy { alpha, scale } => {
                let u = x / scale;
                let u2 = u * u;
                let v1 = match alpha {
                    1 => {
                        let a = 1.0 + u2;
                        lambda / PI * (-2.0 / a.sqrt() + 2.0 * u * u.asinh() / a)
                    }
                    2 => lambda * (u2 - 1.0) / (u2 + 1.0),
                    4 => lambda * (u2 * u2 + 6.0 * u2 - 3.0) / (2.0 * (1.0 + u2)),
                    _ => return None,
                };
                Some(v1 / scale)
            }
            Oracle::Gaussian { sigma2 } => Some(lambda * (x * x / (4.0 * sigma2 * sigma2) - 0.5 / sigma2)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, params.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(name: &str) -> TargetDensity {
        catalog_get(name, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn primitive_recursion_matches_quadrature() {
        for n in 1..=5u32 {
            for &u in &[0.3, 1.0, 4.0, 50.0] {
                let q = integrate(|t| (1.0 + t * t).powi(-(n as i32)), 0.0, u, 1e-14, 1e-13).value;
                assert!((cauchy_power_primitive(n, u) - q).abs() < 1e-12, "n={n} u={u}");
            }
        }
    }

    #[test]
    fn unknown_name_and_bad_alpha() {
        assert!(matches!(catalog_get("nope", &BTreeMap::new()), Err(Error::UnknownTarget(_))));
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), 0.5);
        assert!(catalog_get("cauchy_family", &p).is_err());
        p.insert("alpha".to_string(), 1.5);
        p.insert("bogus".to_string(), 1.0);
        assert!(catalog_get("cauchy_family", &p).is_err());
    }

    #[test]
    fn quartic_bimodal_has_two_modes() {
        let t = get("quartic_bimodal_base");
        assert!(t.density(0.7) > t.density(0.0));
        assert!((t.phi_max() - t.phi(-(0.5f64).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn numeric_cdf_is_monotone_and_centered() {
        let mut p = BTreeMap::new();
        p.insert("alpha".to_string(), 1.5);
        let t = catalog_get("cauchy_family", &p).unwrap();
        assert!((t.cdf(0.0) - 0.5).abs() < 1e-14);
        let mut last = 0.0;
        for i in -400..=400 {
            let c = t.cdf(i as f64 * 0.75);
            assert!(c >= last - 1e-15);
            last = c;
        }
        assert!((t.cdf(250.0) + t.cdf(-250.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cdf_quantile_roundtrip() {
        let t = get("gibbs_gaussian");
        for &p in &[0.01, 0.3, 0.5, 0.9] {
            let q = t.quantile(p).unwrap();
            assert!((t.cdf(q) - p).abs() < 1e-12);
        }
    }
}
