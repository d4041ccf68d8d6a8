//! Drift fields `b(x)` used by the Langevin simulator and the transport solver.

use serde::{Deserialize, Serialize};

use crate::grid::GridFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `b(x) = -gamma x`.
    Linear { gamma: f64 },
    /// `b(x) = Σ_k coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise-linear interpolation of a reconstructed field, continued
    /// linearly beyond the window.
    Tabulated(GridFunction),
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Linear { gamma } => -gamma * x,
            Drift::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Drift::Tabulated(g) => {
                let n = g.len();
                let v = g.values();
                let h = g.h();
                if x < g.x_min() {
                    v[0] + (x - g.x_min()) * (v[1] - v[0]) / h
                } else if x > g.x_max() {
                    v[n - 1] + (x - g.x_max()) * (v[n - 1] - v[n - 2]) / h
                } else {
                    g.interp(x)
                }
            }
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Linear { gamma } => -gamma,
            Drift::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c),
            Drift::Tabulated(g) => {
                let h = g.h();
                let n = g.len();
                let s = ((x - g.x_min()) / h).floor().clamp(0.0, (n - 2) as f64) as usize;
                (g.values()[s + 1] - g.values()[s]) / h
            }
        }
    }

    /// `(b(x), b'(x))` in one pass.
    #[inline]
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        match self {
            Drift::Polynomial { coeffs } => {
                let (mut p, mut dp) = (0.0, 0.0);
                for c in coeffs.iter().rev() {
                    dp = dp * x + p;
                    p = p * x + c;
                }
                (p, dp)
            }
            _ => (self.eval(x), self.derivative(x)),
        }
    }

    /// True when `b` is nonincreasing on the whole line.
    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Drift::Zero => true,
            Drift::Linear { gamma } => *gamma >= 0.0,
            // odd powers with nonpositive coefficients only
            Drift::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .all(|(k, c)| if k % 2 == 1 { *c <= 0.0 } else { *c == 0.0 || k == 0 }),
            Drift::Tabulated(g) => g.values().windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// True when `|b(x)|` grows faster than linearly.
    pub fn is_superlinear(&self) -> bool {
        match self {
            Drift::Zero | Drift::Linear { .. } => false,
            Drift::Polynomial { coeffs } => coeffs.iter().skip(2).any(|c| *c != 0.0),
            Drift::Tabulated(g) => {
                // compare edge slope against mean slope
                let n = g.len();
                let v = g.values();
                let edge = ((v[n - 1] - v[n - 2]) / g.h()).abs();
                let mean = ((v[n - 1] - v[0]) / (g.x_max() - g.x_min())).abs();
                edge > 2.0 * mean.max(f64::MIN_POSITIVE)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Drift::Zero => "zero".into(),
            Drift::Linear { gamma } => format!("linear(gamma={gamma})"),
            Drift::Polynomial { coeffs } => format!("polynomial{coeffs:?}"),
            Drift::Tabulated(g) => format!("tabulated[{}, {}]x{}", g.x_min(), g.x_max(), g.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_value_and_slope() {
        // -(x^3 + 3x) / 2
        let b = Drift::Polynomial { coeffs: vec![0.0, -1.5, 0.0, -0.5] };
        assert_eq!(b.eval(2.0), -7.0);
        assert_eq!(b.derivative(2.0), -1.5 - 6.0);
        assert_eq!(b.eval_with_derivative(2.0), (-7.0, -7.5));
        assert!(b.is_superlinear());
        assert!(b.is_nonincreasing());
        assert!(!Drift::Polynomial { coeffs: vec![0.0, -1.0, 0.5] }.is_nonincreasing());
        assert!(!Drift::Linear { gamma: 1.0 }.is_superlinear());
    }

    #[test]
    fn tabulated_extrapolates_linearly() {
        let g = GridFunction::from_fn(-1.0, 1.0, 21, |x| -2.0 * x).unwrap();
        let b = Drift::Tabulated(g);
        assert!((b.eval(3.0) + 6.0).abs() < 1e-12);
        assert!((b.eval(0.55) + 1.1).abs() < 1e-12);
        assert!((b.derivative(0.3) + 2.0).abs() < 1e-12);
    }
}
