//! Uniformly sampled real functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative node-spacing tolerance when validating imported grids.
const UNIFORM_TOL: f64 = 1e-9;

/// Window and node count of a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 || !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidParameter(format!("bad grid [{x_min}, {x_max}] x {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Symmetric window `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn sample<F: FnMut(f64) -> f64>(&self, f: F) -> Result<GridFunction> {
        GridFunction::from_fn(self.x_min, self.x_max, self.n, f)
    }
}

/// Values sampled at `x_i = x_min + i h`, `h = (x_max - x_min) / (n - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    x_min: f64,
    x_max: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x_min: f64, x_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3 nodes, got {}", values.len())));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidParameter(format!("bad grid window [{x_min}, {x_max}]")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at node {i}")));
        }
        Ok(Self { x_min, x_max, values })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(x_min: f64, x_max: f64, n: usize, mut f: F) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3 nodes, got {n}")));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        let values = (0..n).map(|i| f(x_min + i as f64 * h)).collect();
        Self::new(x_min, x_max, values)
    }

    /// Builds a grid function from explicit abscissae, verifying uniform spacing.
    pub fn from_samples(xs: &[f64], values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} abscissae vs {} values", xs.len(), values.len())));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidParameter("grid needs at least 3 nodes".into()));
        }
        let n = xs.len();
        let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        for (i, &x) in xs.iter().enumerate() {
            let expect = xs[0] + i as f64 * h;
            let dev = (x - expect).abs();
            if dev > UNIFORM_TOL * h.abs().max(1.0) * 10.0 {
                return Err(Error::NonUniformGrid { index: i, deviation: dev });
            }
        }
        Self::new(xs[0], xs[n - 1], values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.values.len() - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn xs(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.len()).map(|i| self.x_min + i as f64 * h).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same window and node count, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), self.len())));
        }
        Self::new(self.x_min, self.x_max, values)
    }

    pub fn map<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> Result<Self> {
        let h = self.h();
        let v = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &y)| f(self.x_min + i as f64 * h, y))
            .collect();
        self.with_values(v)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { x_min: self.x_min, x_max: self.x_max, n: self.values.len() }
    }

    /// First derivative by fourth-order stencils (one-sided near the edges).
    pub fn derivative(&self) -> GridFunction {
        Self { x_min: self.x_min, x_max: self.x_max, values: derivative_values(&self.values, self.h()) }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.len() == other.len()
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.h()
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.h()
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}] x {} vs [{}, {}] x {}",
                self.x_min,
                self.x_max,
                self.len(),
                other.x_min,
                other.x_max,
                other.len()
            )))
        }
    }

    /// Index of the node nearest to `x`, if inside the window.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        if x < self.x_min - 0.5 * self.h() || x > self.x_max + 0.5 * self.h() {
            return None;
        }
        let i = ((x - self.x_min) / self.h()).round() as isize;
        Some(i.clamp(0, self.len() as isize - 1) as usize)
    }

    /// Piecewise-linear interpolation; constant extrapolation outside the window.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.len();
        let s = (x - self.x_min) / self.h();
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Trapezoidal integral over the window.
    pub fn integral(&self) -> f64 {
        let n = self.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.h() * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// h-weighted L1 norm.
    pub fn l1(&self) -> f64 {
        self.h() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Two-column CSV with the `# gridfunction mu=.. method=..` header line.
    pub fn to_csv(&self, mu: f64, method: &str, extra_header: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# gridfunction mu={mu} method={method}");
        for line in extra_header {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "# columns: x,value");
        let h = self.h();
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.x_min + i as f64 * h, v);
        }
        s
    }

    /// Parses two-column CSV; `#` lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(cols.next())?);
            vs.push(parse(cols.next())?);
        }
        Self::from_samples(&xs, vs)
    }
}

pub(crate) fn derivative_values(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    if n < 5 {
        return (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (f[b] - f[a]) / ((b - a) as f64 * h)
            })
            .collect();
    }
    let d = 12.0 * h;
    (0..n)
        .map(|i| match i {
            0 => (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / d,
            1 => (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / d,
            _ if i == n - 1 => {
                (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / d
            }
            _ if i == n - 2 => {
                (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / d
            }
            _ => (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / d,
        })
        .collect()
}
