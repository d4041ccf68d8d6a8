//! Ensemble bookkeeping shared by both simulators: deterministic block
//! partitioning across workers, snapshot statistics and histograms.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats::{iqr_sorted, mean_se, quantile_sorted};

/// Paths per RNG stream. Block `k` always uses stream id `k`, so results do not
/// depend on the worker count.
pub const BLOCK_SIZE: usize = 1000;

/// Non-finite path fraction that aborts a run.
pub const MAX_FAILED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(invalid(format!("bad histogram [{lo}, {hi}] x {bins}")));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / self.bins as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub time: f64,
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Paths that became non-finite; with the other three fields the counts
    /// add up to the ensemble size.
    pub failed: u64,
}

impl Histogram {
    pub fn build(time: f64, spec: HistogramSpec, xs: &[f64]) -> Self {
        let mut counts = vec![0u64; spec.bins];
        let (mut underflow, mut overflow, mut failed) = (0, 0, 0);
        let width = (spec.hi - spec.lo) / spec.bins as f64;
        for &x in xs {
            if !x.is_finite() {
                failed += 1;
            } else if x < spec.lo {
                underflow += 1;
            } else if x >= spec.hi {
                overflow += 1;
            } else {
                let k = (((x - spec.lo) / width) as usize).min(spec.bins - 1);
                counts[k] += 1;
            }
        }
        Self { time, spec, counts, underflow, overflow, failed }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow + self.failed
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        let total = self.total().max(1) as f64;
        let width = (self.spec.hi - self.spec.lo) / self.spec.bins as f64;
        let _ = writeln!(s, "# histogram t={} underflow={} overflow={} failed={}", self.time, self.underflow, self.overflow, self.failed);
        let _ = writeln!(s, "# columns: bin_lo,bin_hi,count,density");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", self.spec.edge(k), self.spec.edge(k + 1), c, *c as f64 / (total * width));
        }
        s
    }
}

/// Time series of ensemble dispersion plus histogram snapshots.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub times: Vec<f64>,
    /// Ensemble mean of `x²`; present only when the target variance exists.
    pub variance: Option<Vec<f64>>,
    /// Standard error of the `x²` mean.
    pub variance_se: Option<Vec<f64>>,
    pub iqr: Vec<f64>,
    pub median: Vec<f64>,
    /// Standard error of the median, from the interquartile spread.
    pub median_se: Vec<f64>,
    pub histograms: Vec<Histogram>,
    pub failed_paths: usize,
    /// Sorted finite positions at the last snapshot.
    #[serde(skip)]
    pub final_sorted: Vec<f64>,
}

impl EnsembleStats {
    /// `positions[s]` holds every path's position at `times[s]`.
    pub fn from_positions(
        times: &[f64],
        positions: &[Vec<f64>],
        with_variance: bool,
        hist: Option<(HistogramSpec, &[f64])>,
    ) -> Self {
        let n_paths = positions.first().map_or(0, |p| p.len());
        let mut variance = Vec::with_capacity(times.len());
        let mut variance_se = Vec::with_capacity(times.len());
        let mut iqr = Vec::with_capacity(times.len());
        let mut median = Vec::with_capacity(times.len());
        let mut median_se = Vec::with_capacity(times.len());
        let mut failed_paths = 0;
        let mut final_sorted = Vec::new();
        for (s, xs) in positions.iter().enumerate() {
            let mut finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
            failed_paths = failed_paths.max(xs.len() - finite.len());
            let sq: Vec<f64> = finite.iter().map(|x| x * x).collect();
            let (m, se) = if sq.is_empty() { (f64::NAN, f64::NAN) } else { mean_se(&sq) };
            variance.push(m);
            variance_se.push(se);
            finite.sort_by(|a, b| a.total_cmp(b));
            let q = iqr_sorted(&finite);
            iqr.push(q);
            median.push(quantile_sorted(&finite, 0.5));
            // asymptotic median error for a density with this quartile spread
            median_se.push(1.2533 * q / 1.349 / (finite.len().max(1) as f64).sqrt());
            if s + 1 == positions.len() {
                final_sorted = finite;
            }
        }
        let histograms = match hist {
            Some((spec, at)) => at
                .iter()
                .map(|&t| {
                    let s = nearest_index(times, t);
                    Histogram::build(times[s], spec, &positions[s])
                })
                .collect(),
            None => Vec::new(),
        };
        Self {
            n_paths,
            times: times.to_vec(),
            variance: with_variance.then_some(variance),
            variance_se: with_variance.then_some(variance_se),
            iqr,
            median,
            median_se,
            histograms,
            failed_paths,
            final_sorted,
        }
    }

    /// Columns `t,variance,variance_se,iqr,median` (variance columns only when
    /// reported).
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        match (&self.variance, &self.variance_se) {
            (Some(v), Some(se)) => {
                let _ = writeln!(s, "# columns: t,variance,variance_se,iqr,median");
                for i in 0..self.times.len() {
                    let _ = writeln!(s, "{},{},{},{},{}", self.times[i], v[i], se[i], self.iqr[i], self.median[i]);
                }
            }
            _ => {
                let _ = writeln!(s, "# columns: t,iqr,median");
                for i in 0..self.times.len() {
                    let _ = writeln!(s, "{},{},{}", self.times[i], self.iqr[i], self.median[i]);
                }
            }
        }
        s
    }

    /// Mean of `x²` over snapshots with `t >= t_from`, with a standard error
    /// that treats those snapshots as fully correlated (the conservative
    /// choice: the mean of their standard errors).
    pub fn saturated_variance(&self, t_from: f64) -> Option<(f64, f64)> {
        let v = self.variance.as_ref()?;
        let se = self.variance_se.as_ref()?;
        let idx: Vec<usize> = (0..self.times.len()).filter(|&i| self.times[i] >= t_from - 1e-12).collect();
        if idx.is_empty() {
            return None;
        }
        let k = idx.len() as f64;
        Some((idx.iter().map(|&i| v[i]).sum::<f64>() / k, idx.iter().map(|&i| se[i]).sum::<f64>() / k))
    }

    pub fn saturated_iqr(&self, t_from: f64) -> Option<f64> {
        let idx: Vec<usize> = (0..self.times.len()).filter(|&i| self.times[i] >= t_from - 1e-12).collect();
        if idx.is_empty() {
            return None;
        }
        Some(idx.iter().map(|&i| self.iqr[i]).sum::<f64>() / idx.len() as f64)
    }
}

pub fn nearest_index(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &ti) in times.iter().enumerate() {
        if (ti - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// Evenly spaced snapshot times `0, t_final/k, ..., t_final`.
pub fn uniform_times(t_final: f64, count: usize) -> Vec<f64> {
    let k = count.max(1);
    (0..=k).map(|i| t_final * i as f64 / k as f64).collect()
}

/// Output of one block of paths.
#[derive(Debug, Clone, Default)]
pub struct BlockOutput {
    /// `positions[s][j]` is path `j` of the block at snapshot `s`.
    pub positions: Vec<Vec<f64>>,
    pub failed: usize,
    pub counters: [u64; 4],
}

pub struct BlockRun {
    pub positions: Vec<Vec<f64>>,
    pub failed: usize,
    pub counters: [u64; 4],
}

/// Runs `n_paths` paths as fixed-size blocks on up to `workers` threads and
/// concatenates the blocks in index order.
pub fn run_blocks<F>(n_paths: usize, workers: usize, snapshots: usize, f: F) -> Result<BlockRun>
where
    F: Fn(u64, usize) -> Result<BlockOutput> + Sync,
{
    if n_paths == 0 {
        return Err(invalid("ensemble needs at least one path"));
    }
    let blocks: Vec<(u64, usize)> = (0..n_paths.div_ceil(BLOCK_SIZE))
        .map(|k| (k as u64, BLOCK_SIZE.min(n_paths - k * BLOCK_SIZE)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<BlockOutput>> = pool.install(|| blocks.par_iter().map(|&(k, c)| f(k, c)).collect());
    let mut positions = vec![Vec::with_capacity(n_paths); snapshots];
    let mut failed = 0;
    let mut counters = [0u64; 4];
    for out in outputs {
        let out = out?;
        for (dst, src) in positions.iter_mut().zip(out.positions) {
            dst.extend(src);
        }
        failed += out.failed;
        for (a, b) in counters.iter_mut().zip(out.counters) {
            *a += b;
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * n_paths as f64 {
        return Err(Error::Stiffness { failed, total: n_paths });
    }
    Ok(BlockRun { positions, failed, counters })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_cover_all_paths() {
        let spec = HistogramSpec::new(-1.0, 1.0, 4).unwrap();
        let h = Histogram::build(0.0, spec, &[-2.0, -0.9, 0.0, 0.99, 1.0, f64::NAN]);
        assert_eq!(h.counts, vec![1, 0, 1, 1]);
        assert_eq!((h.underflow, h.overflow, h.failed), (1, 1, 1));
        assert_eq!(h.total(), 6);
    }

    #[test]
    fn blocks_are_ordered_and_worker_independent() {
        let run = |w| {
            run_blocks(2500, w, 1, |k, c| {
                Ok(BlockOutput { positions: vec![(0..c).map(|j| (k * 10_000 + j as u64) as f64).collect()], ..Default::default() })
            })
            .unwrap()
            .positions
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a[0].len(), 2500);
        assert_eq!(a[0][1000], 10_000.0);
    }
}
