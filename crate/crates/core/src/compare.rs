//! Side-by-side relaxation of the Langevin and semigroup dynamics towards a
//! common target, optionally with both transport equations alongside.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::catalog::TargetDensity;
use crate::ensemble::EnsembleStats;
use crate::error::{Error, Result};
use crate::fpe::{evolve_langevin_fpe, evolve_semigroup_fpe, SolveConfig, Trajectory};
use crate::grid::GridFunction;
use crate::langevin::{run_langevin_ensemble, LangevinConfig};
use crate::semigroup::{run_semigroup_ensemble, KmcCounters, KmcModel, SemigroupConfig};

/// Dispersion measure tracked over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispersion {
    /// Ensemble mean of `x²`.
    Variance,
    /// Interquartile range, for targets without a second moment.
    Iqr,
}

impl fmt::Display for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dispersion::Variance => "variance",
            Dispersion::Iqr => "iqr",
        })
    }
}

impl FromStr for Dispersion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(Dispersion::Variance),
            "iqr" => Ok(Dispersion::Iqr),
            other => Err(Error::Config(format!("unknown dispersion mode '{other}'"))),
        }
    }
}

impl Dispersion {
    /// Variance when the target has one, IQR otherwise.
    pub fn auto(target: &TargetDensity) -> Self {
        if target.variance().is_some() {
            Dispersion::Variance
        } else {
            Dispersion::Iqr
        }
    }

    fn units(self) -> &'static str {
        match self {
            Dispersion::Variance => "length^2",
            Dispersion::Iqr => "length",
        }
    }
}

/// Transport-equation counterpart of the comparison: solver settings, the
/// drift on the solver grid and the initial density.
#[derive(Debug, Clone)]
pub struct PdeSetup {
    pub solve: SolveConfig,
    pub drift: GridFunction,
    pub rho0: GridFunction,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub mode: Dispersion,
    pub times: Vec<f64>,
    pub langevin: EnsembleStats,
    pub semigroup: EnsembleStats,
    pub counters: KmcCounters,
    pub pde_langevin: Option<Vec<f64>>,
    pub pde_semigroup: Option<Vec<f64>>,
}

/// Quantile of a gridded density by linear interpolation of its cumulative
/// trapezoid sum, normalized by the total mass.
pub fn grid_quantile(rho: &GridFunction, p: f64) -> f64 {
    let v = rho.values();
    let h = rho.h();
    let mut cum = vec![0.0; v.len()];
    for i in 1..v.len() {
        cum[i] = cum[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    }
    let total = cum[v.len() - 1];
    let target = p * total;
    let k = cum.partition_point(|&c| c < target).clamp(1, v.len() - 1);
    let (c0, c1) = (cum[k - 1], cum[k]);
    let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
    rho.x(k - 1) + frac * h
}

pub fn grid_iqr(rho: &GridFunction) -> f64 {
    grid_quantile(rho, 0.75) - grid_quantile(rho, 0.25)
}

fn pde_curve(tr: &Trajectory, mode: Dispersion) -> Vec<f64> {
    tr.snapshots
        .iter()
        .map(|s| match mode {
            Dispersion::Variance => s.variance,
            Dispersion::Iqr => grid_iqr(&s.rho),
        })
        .collect()
}

/// Runs both simulators from the same initial data and, when `pde` is given,
/// both transport equations on the same snapshot times.
pub fn cmd_compare(
    target: &TargetDensity,
    langevin: &LangevinConfig,
    semigroup: &SemigroupConfig,
    times: &[f64],
    mode: Dispersion,
    pde: Option<&PdeSetup>,
) -> Result<Comparison> {
    if mode == Dispersion::Variance && target.variance().is_none() {
        return Err(Error::Config(format!(
            "target {} has no finite variance; use the iqr mode",
            target.name()
        )));
    }
    if langevin.initial.describe() != semigroup.initial.describe() {
        return Err(Error::Config("the two simulators must start from the same initial data".into()));
    }
    let with_variance = mode == Dispersion::Variance;
    let lang = run_langevin_ensemble(langevin, times, with_variance, None)?;
    let model = KmcModel::new(semigroup)?;
    let (semi, counters) = run_semigroup_ensemble(&model, times, with_variance, None)?;
    let (pde_langevin, pde_semigroup) = match pde {
        Some(setup) => {
            let mut solve = setup.solve.clone();
            solve.snapshot_times = times.to_vec();
            solve.t_final = times.iter().cloned().fold(0.0, f64::max);
            let a = evolve_langevin_fpe(&setup.rho0, &setup.drift, &solve, Some(target))?;
            let b = evolve_semigroup_fpe(&setup.rho0, target, &solve)?;
            (Some(pde_curve(&a, mode)), Some(pde_curve(&b, mode)))
        }
        None => (None, None),
    };
    Ok(Comparison {
        mode,
        times: times.to_vec(),
        langevin: lang,
        semigroup: semi,
        counters,
        pde_langevin,
        pde_semigroup,
    })
}

impl Comparison {
    /// Dispersion curve and its standard error (variance mode only).
    pub fn curve(stats: &EnsembleStats, mode: Dispersion) -> (Vec<f64>, Option<Vec<f64>>) {
        match mode {
            Dispersion::Variance => (
                stats.variance.clone().unwrap_or_default(),
                stats.variance_se.clone(),
            ),
            Dispersion::Iqr => (stats.iqr.clone(), None),
        }
    }

    /// `|langevin - semigroup| / combined standard error` per snapshot.
    pub fn separation_z(&self) -> Option<Vec<f64>> {
        let (a, sa) = Self::curve(&self.langevin, self.mode);
        let (b, sb) = Self::curve(&self.semigroup, self.mode);
        let (sa, sb) = (sa?, sb?);
        Some(
            (0..a.len())
                .map(|i| {
                    let se = (sa[i] * sa[i] + sb[i] * sb[i]).sqrt();
                    if se > 0.0 {
                        (a[i] - b[i]).abs() / se
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }

    /// Mean level over snapshots with `t >= t_from`.
    pub fn saturation(values: &[f64], times: &[f64], t_from: f64) -> f64 {
        let sel: Vec<f64> = times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t >= t_from - 1e-12)
            .map(|(_, v)| *v)
            .collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let (a, sa) = Self::curve(&self.langevin, self.mode);
        let (b, sb) = Self::curve(&self.semigroup, self.mode);
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        let u = self.mode.units();
        let mut cols = vec!["t".to_string(), "langevin".into()];
        let mut units = vec!["time".to_string(), u.into()];
        if sa.is_some() {
            cols.push("langevin_se".into());
            units.push(u.into());
        }
        cols.push("semigroup".into());
        units.push(u.into());
        if sb.is_some() {
            cols.push("semigroup_se".into());
            units.push(u.into());
        }
        cols.push("difference".into());
        units.push(u.into());
        if self.pde_langevin.is_some() {
            cols.extend(["pde_langevin".to_string(), "pde_semigroup".into()]);
            units.extend([u.to_string(), u.into()]);
        }
        let _ = writeln!(s, "# dispersion: {}", self.mode);
        let _ = writeln!(s, "# units: {}", units.join(","));
        let _ = writeln!(s, "# columns: {}", cols.join(","));
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i].to_string(), a[i].to_string()];
            if let Some(se) = &sa {
                row.push(se[i].to_string());
            }
            row.push(b[i].to_string());
            if let Some(se) = &sb {
                row.push(se[i].to_string());
            }
            row.push((a[i] - b[i]).to_string());
            if let (Some(p), Some(q)) = (&self.pde_langevin, &self.pde_semigroup) {
                row.push(p[i].to_string());
                row.push(q[i].to_string());
            }
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Gnuplot script overlaying the two curves (and the PDE points).
    pub fn plot_script(&self, csv_name: &str, target_name: &str) -> String {
        let (lang_col, semi_col, pde_col) = match self.mode {
            Dispersion::Variance => (2, 4, 7),
            Dispersion::Iqr => (2, 3, 5),
        };
        let ylabel = match self.mode {
            Dispersion::Variance => "X^2(t)",
            Dispersion::Iqr => "IQR(t)",
        };
        let stem = csv_name.trim_end_matches(".csv");
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set datafile commentschars '#'");
        let _ = writeln!(s, "set terminal pngcairo size 800,500");
        let _ = writeln!(s, "set output '{stem}.png'");
        let _ = writeln!(s, "set title '{target_name}'");
        let _ = writeln!(s, "set xlabel 't'");
        let _ = writeln!(s, "set ylabel '{ylabel}'");
        let _ = writeln!(s, "set key bottom right");
        let mut plot = format!(
            "plot '{csv_name}' using 1:{lang_col} with lines lw 2 title 'Langevin', \\\n     '' using 1:{semi_col} with lines lw 2 dt 2 title 'semigroup'"
        );
        if self.pde_langevin.is_some() {
            let _ = write!(
                plot,
                ", \\\n     '' using 1:{} with points pt 7 title 'Langevin PDE', \\\n     '' using 1:{} with points pt 6 title 'semigroup PDE'",
                pde_col,
                pde_col + 1
            );
        }
        let _ = writeln!(s, "{plot}");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_quartiles_of_cauchy() {
        let g = GridFunction::from_fn(-2000.0, 2000.0, 400_001, |x| 1.0 / (std::f64::consts::PI * (1.0 + x * x))).unwrap();
        assert!((grid_quantile(&g, 0.75) - 1.0).abs() < 2e-3);
        assert!((grid_iqr(&g) - 2.0).abs() < 4e-3);
    }
}
