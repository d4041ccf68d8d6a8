//! Command-line front end: flag parsing, configuration resolution, dispatch
//! and output persistence.
//!
//! Every parameter has a `section.key` name. Values come from built-in
//! defaults, then the `--config` file, then dedicated flags, then `--set`
//! assignments. Values left as `auto` are resolved before anything runs, and
//! the resolved configuration is what gets hashed and echoed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::catalog::{catalog_get, TargetDensity};
use crate::compare::{cmd_compare, Comparison, Dispersion, PdeSetup};
use crate::config::Config;
use crate::drift::Drift;
use crate::ensemble::{uniform_times, EnsembleStats, HistogramSpec};
use crate::error::{Error, Result};
use crate::fpe::{cauchy_bump, evolve_langevin_fpe, evolve_semigroup_fpe, SolveConfig, Trajectory};
use crate::fraclap::{frac_laplacian_pv, frac_laplacian_spectral, Method, OperatorConfig, TailModel};
use crate::grid::{GridFunction, GridSpec};
use crate::langevin::{run_langevin_ensemble, Initial, LangevinConfig, Scheme};
use crate::report::{Outputs, RunReport, REPORT_FILE};
use crate::reverse::{reconstruct, ReverseConfig};
use crate::rng::RngStream;
use crate::semigroup::{run_semigroup_ensemble, KmcModel, SemigroupConfig};
use crate::stable::{char_fn, empirical_char_fn, sample_many, StableParams};
use crate::stats::{iqr_sorted, ks_statistic, quantile_sorted, sorted_copy, KS_CRITICAL_1PCT};

#[derive(Debug, Parser)]
#[command(name = "levylab", version, about = "Stable jump processes relaxing to a target density")]
pub struct Cli {
    /// Configuration file of `[section]` headers and `key = value` lines;
    /// a run report from an earlier run is accepted too.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long = "out-dir", global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Override any key, e.g. `--set fpe.dt=0.005` (repeatable).
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw symmetric stable variates.
    Sample(SampleArgs),
    /// Apply the fractional Laplacian to a tabulated function.
    Fraclap(FraclapArgs),
    /// Reconstruct drift and semigroup potential from a target density.
    Reverse(ModelArgs),
    /// Langevin ensemble with stable noise.
    SimLangevin(SimArgs),
    /// Kinetic Monte Carlo of the semigroup jump process.
    SimSemigroup(SemigroupArgs),
    /// Evolve the transport equations on a grid.
    SolveFpe(FpeArgs),
    /// Both dynamics side by side from common initial data.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Fraclap(_) => "fraclap",
            Command::Reverse(_) => "reverse",
            Command::SimLangevin(_) => "sim-langevin",
            Command::SimSemigroup(_) => "sim-semigroup",
            Command::SolveFpe(_) => "solve-fpe",
            Command::Compare(_) => "compare",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(ToString::to_string)
        }
        match self {
            Command::Sample(a) => vec![("sample.mu", s(&a.mu)), ("sample.scale", s(&a.scale)), ("sample.n", s(&a.n))],
            Command::Fraclap(a) => vec![
                ("fraclap.input", a.input.as_ref().map(|p| p.display().to_string())),
                ("fraclap.mu", s(&a.mu)),
                ("fraclap.method", s(&a.method)),
                ("fraclap.tail", s(&a.tail)),
            ],
            Command::Reverse(m) => m.overrides(),
            Command::SimLangevin(a) => {
                let mut v = a.model.overrides();
                v.extend([
                    ("langevin.paths", s(&a.paths)),
                    ("langevin.dt", s(&a.dt)),
                    ("langevin.t_final", s(&a.tfinal)),
                    ("langevin.scheme", s(&a.scheme)),
                    ("langevin.drift", s(&a.drift)),
                ]);
                v
            }
            Command::SimSemigroup(a) => {
                let mut v = a.model.overrides();
                v.extend([
                    ("semigroup.paths", s(&a.paths)),
                    ("semigroup.t_final", s(&a.tfinal)),
                    ("semigroup.epsilon", s(&a.epsilon)),
                ]);
                v
            }
            Command::SolveFpe(a) => {
                let mut v = a.model.overrides();
                v.extend([("fpe.form", s(&a.form)), ("fpe.dt", s(&a.dt)), ("fpe.t_final", s(&a.tfinal))]);
                v
            }
            Command::Compare(a) => {
                let mut v = a.model.overrides();
                v.extend([
                    ("compare.paths", s(&a.paths)),
                    ("compare.t_final", s(&a.tfinal)),
                    ("compare.mode", s(&a.mode)),
                    ("compare.pde", a.pde.then(|| "true".to_string())),
                ]);
                v
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Number of variates.
    #[arg(short = 'n', long = "count")]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FraclapArgs {
    /// Two-column CSV `x,value` on a uniform grid.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// `pv` or `spectral`.
    #[arg(long)]
    pub method: Option<String>,
    /// `zero`, `power:<p>`, `periodic` or `auto`.
    #[arg(long)]
    pub tail: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Catalog entry name.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Noise intensity.
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl ModelArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("target.name", self.target.clone()),
            ("model.mu", self.mu.map(|v| v.to_string())),
            ("model.lambda", self.lambda.map(|v| v.to_string())),
        ]
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    #[arg(long)]
    pub scheme: Option<String>,
    /// `oracle`, `reconstructed`, `zero`, `linear:<gamma>` or `auto`.
    #[arg(long)]
    pub drift: Option<String>,
}

#[derive(Debug, Args)]
pub struct SemigroupArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Minimal jump size.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FpeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `langevin`, `semigroup` or `both`.
    #[arg(long)]
    pub form: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// `variance`, `iqr` or `auto`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Also evolve both transport equations.
    #[arg(long)]
    pub pde: bool,
}

const KNOWN_SECTIONS: [&str; 11] = [
    "run", "target", "model", "sample", "fraclap", "reverse", "langevin", "semigroup", "hist", "fpe", "compare",
];

const RUN_KEYS: [(&str, &str); 3] = [("run.seed", "1"), ("run.workers", "1"), ("run.out_dir", "out")];
const MODEL_KEYS: [(&str, &str); 3] = [("target.name", "quadratic_cauchy"), ("model.mu", "1"), ("model.lambda", "auto")];
const HIST_KEYS: [(&str, &str); 4] = [("hist.lo", "-10"), ("hist.hi", "10"), ("hist.bins", "50"), ("hist.times", "final")];
const FPE_GRID_KEYS: [(&str, &str); 8] = [
    ("fpe.window", "50"),
    ("fpe.n", "4001"),
    ("fpe.dt", "0.01"),
    ("fpe.splitting", "characteristic"),
    ("fpe.advection", "semi_lagrangian"),
    ("fpe.outside", "reinject"),
    ("fpe.clip", "true"),
    ("fpe.bump_width", "auto"),
];

/// Sections read by a command and the keys it accepts, with defaults.
/// The `target` section is open: its numeric keys go to the catalog.
fn command_keys(name: &str) -> (Vec<&'static str>, Vec<(&'static str, &'static str)>) {
    let mut keys: Vec<(&str, &str)> = RUN_KEYS.to_vec();
    let sections: &[&str] = match name {
        "sample" => {
            keys.extend([("sample.mu", "1"), ("sample.scale", "1"), ("sample.n", "1000")]);
            &["run", "sample"]
        }
        "fraclap" => {
            keys.extend([("fraclap.input", ""), ("fraclap.mu", "1"), ("fraclap.method", "pv"), ("fraclap.tail", "auto")]);
            &["run", "fraclap"]
        }
        "reverse" => {
            keys.extend(MODEL_KEYS);
            keys.extend([
                ("reverse.window", "200"),
                ("reverse.n", "8001"),
                ("reverse.symmetrize", "true"),
                ("reverse.richardson", "false"),
            ]);
            &["run", "target", "model", "reverse"]
        }
        "sim-langevin" => {
            keys.extend(MODEL_KEYS);
            keys.extend(HIST_KEYS);
            keys.extend([
                ("langevin.dt", "0.001"),
                ("langevin.t_final", "20"),
                ("langevin.paths", "100000"),
                ("langevin.scheme", "auto"),
                ("langevin.drift", "auto"),
                ("langevin.initial", "point:0"),
                ("langevin.snapshots", "40"),
            ]);
            &["run", "target", "model", "langevin", "hist"]
        }
        "sim-semigroup" => {
            keys.extend(MODEL_KEYS);
            keys.extend(HIST_KEYS);
            keys.extend([
                ("semigroup.epsilon", "0.01"),
                ("semigroup.t_final", "20"),
                ("semigroup.paths", "100000"),
                ("semigroup.initial", "point:0"),
                ("semigroup.snapshots", "40"),
                ("semigroup.cache_points", "4001"),
                ("semigroup.domain_bound", "auto"),
            ]);
            &["run", "target", "model", "semigroup", "hist"]
        }
        "solve-fpe" => {
            keys.extend(MODEL_KEYS);
            keys.extend(FPE_GRID_KEYS);
            keys.extend([
                ("fpe.form", "both"),
                ("fpe.t_final", "20"),
                ("fpe.drift", "auto"),
                ("fpe.initial", "bump"),
                ("fpe.snapshots", "20"),
            ]);
            &["run", "target", "model", "fpe"]
        }
        "compare" => {
            keys.extend(MODEL_KEYS);
            keys.extend(FPE_GRID_KEYS);
            keys.extend([
                ("compare.mode", "auto"),
                ("compare.pde", "false"),
                ("compare.t_final", "20"),
                ("compare.paths", "100000"),
                ("compare.snapshots", "40"),
                ("compare.initial", "bump"),
                ("langevin.dt", "0.001"),
                ("langevin.scheme", "auto"),
                ("langevin.drift", "auto"),
                ("semigroup.epsilon", "0.01"),
                ("semigroup.cache_points", "4001"),
                ("semigroup.domain_bound", "auto"),
            ]);
            &["run", "target", "model", "compare", "langevin", "semigroup", "fpe"]
        }
        _ => &[],
    };
    (sections.to_vec(), keys)
}

fn accept(name: &str, sections: &[&str], keys: &[(&str, &str)], key: &str) -> Result<bool> {
    let section = key.split_once('.').map_or("", |(s, _)| s);
    if !KNOWN_SECTIONS.contains(&section) {
        return Err(Error::Config(format!("unknown section in key {key}")));
    }
    if !sections.contains(&section) {
        return Ok(false);
    }
    if section == "target" || key == "run.command" || keys.iter().any(|(k, _)| *k == key) {
        Ok(true)
    } else {
        Err(Error::Config(format!("{name} does not use key {key}")))
    }
}

/// Builds the effective configuration of a parsed command line.
pub fn resolve(cli: &Cli) -> Result<Config> {
    let name = cli.command.name();
    let (sections, keys) = command_keys(name);
    let mut cfg = Config::new();
    if let Some(path) = &cli.config {
        let file = Config::load(path)?.without_report_sections();
        if let Some(cmd) = file.get("run.command") {
            if cmd != name {
                return Err(Error::Config(format!("{} was written by '{cmd}', not '{name}'", path.display())));
            }
        }
        for (k, v) in file.iter() {
            if accept(name, &sections, &keys, k)? {
                cfg.set(k, v)?;
            }
        }
    }
    let globals = [
        ("run.seed", cli.seed.map(|v| v.to_string())),
        ("run.workers", cli.workers.map(|v| v.to_string())),
        ("run.out_dir", cli.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in globals.into_iter().chain(cli.command.overrides()) {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for a in &cli.set {
        let mut one = Config::new();
        one.set_assignment(a)?;
        for (k, v) in one.iter() {
            if !accept(name, &sections, &keys, k)? {
                return Err(Error::Config(format!("{name} does not read section of {k}")));
            }
            cfg.set(k, v)?;
        }
    }
    for (k, d) in keys {
        if !cfg.contains(k) {
            cfg.set(k, d)?;
        }
    }
    cfg.set("run.command", name)?;
    Ok(cfg)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for (name, _) in &report.outputs {
                println!("wrote {name}");
            }
            println!("config hash {}", report.config.hash());
            0
        }
        Err(e) => {
            eprintln!("levylab: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writes its outputs and report, and returns the report.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = resolve(cli)?;
    let mut job = Job { cfg, diagnostics: Vec::new(), files: Vec::new() };
    if job.cfg.parsed::<usize>("run.workers")? == 0 {
        return Err(Error::Config("run.workers must be at least 1".into()));
    }
    job.cfg.parsed::<u64>("run.seed")?;
    match cli.command.name() {
        "sample" => cmd_sample(&mut job)?,
        "fraclap" => cmd_fraclap(&mut job)?,
        "reverse" => cmd_reverse(&mut job)?,
        "sim-langevin" => cmd_sim_langevin(&mut job)?,
        "sim-semigroup" => cmd_sim_semigroup(&mut job)?,
        "solve-fpe" => cmd_solve_fpe(&mut job)?,
        "compare" => cmd_compare_run(&mut job)?,
        other => return Err(Error::Config(format!("unknown command {other}"))),
    }
    let out_dir = PathBuf::from(job.cfg.get("run.out_dir").unwrap_or("out"));
    let mut outputs = Outputs::new(&out_dir)?;
    for (name, text) in &job.files {
        outputs.write(name, text)?;
    }
    let mut report = RunReport::new(job.cfg);
    report.outputs = outputs.files().to_vec();
    report.diagnostics = job.diagnostics;
    report.wall_clock_s = start.elapsed().as_secs_f64();
    std::fs::write(out_dir.join(REPORT_FILE), report.render())?;
    Ok(report)
}

struct Job {
    cfg: Config,
    diagnostics: Vec<(String, String)>,
    files: Vec<(String, String)>,
}

impl Job {
    fn f64(&self, key: &str) -> Result<f64> {
        self.cfg.parsed(key)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.cfg.parsed(key)
    }

    fn str(&self, key: &str) -> &str {
        self.cfg.get(key).unwrap_or("")
    }

    fn parse<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr<Err = Error>,
    {
        self.str(key).parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}")))
    }

    fn seed(&self) -> u64 {
        self.cfg.parsed("run.seed").unwrap_or(1)
    }

    fn workers(&self) -> usize {
        self.cfg.parsed("run.workers").unwrap_or(1)
    }

    fn fix(&mut self, key: &str, value: impl ToString) -> Result<()> {
        self.cfg.set(key, value.to_string())
    }

    fn diag(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }

    fn emit(&mut self, name: impl Into<String>, text: String) {
        self.files.push((name.into(), text));
    }

    /// Header lines naming the command, the config hash and the units.
    fn header(&self, units: &str) -> Vec<String> {
        let mut h = vec![format!("levylab {} config_hash={}", self.str("run.command"), self.cfg.hash())];
        if !units.is_empty() {
            h.push(format!("units: {units}"));
        }
        h
    }

    fn target(&self) -> Result<TargetDensity> {
        let mut params = BTreeMap::new();
        let mut name = None;
        let mut table = None;
        for (k, v) in self.cfg.section("target") {
            match k {
                "name" => name = Some(v.to_string()),
                "table" => table = Some(v.to_string()),
                _ => {
                    let x: f64 = v.parse().map_err(|_| Error::Config(format!("target.{k} = {v}: not a number")))?;
                    params.insert(k.to_string(), x);
                }
            }
        }
        if let Some(path) = table {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read target table {path}: {e}")))?;
            return TargetDensity::from_table(name.as_deref().unwrap_or("tabulated"), GridFunction::from_csv(&text)?);
        }
        catalog_get(name.as_deref().unwrap_or("quadratic_cauchy"), &params)
    }

    /// `(mu, lambda)` with `lambda = auto` resolved to the target's intensity.
    fn model(&mut self, target: &TargetDensity) -> Result<(f64, f64)> {
        if self.str("model.lambda") == "auto" {
            self.fix("model.lambda", target.default_intensity())?;
        }
        Ok((self.f64("model.mu")?, self.f64("model.lambda")?))
    }

    fn drift(&mut self, key: &str, target: &TargetDensity, mu: f64, lambda: f64) -> Result<Drift> {
        let gaussian = target.name() == "gibbs_gaussian";
        let oracle_mu = if gaussian { 2.0 } else { 1.0 };
        if self.str(key) == "auto" {
            let choice = if mu == oracle_mu && target.oracle_drift(lambda).is_some() { "oracle" } else { "reconstructed" };
            self.fix(key, choice)?;
        }
        let choice = self.str(key).to_string();
        match choice.as_str() {
            "oracle" => {
                if mu != oracle_mu {
                    return Err(Error::Config(format!("the closed-form drift of {} assumes mu = {oracle_mu}", target.name())));
                }
                target
                    .oracle_drift(lambda)
                    .ok_or_else(|| Error::Config(format!("{} has no closed-form drift", target.name())))
            }
            "reconstructed" => {
                let r = reconstruct(target, &ReverseConfig::new(mu, lambda)?)?;
                self.diag("drift_reconstruction_residual", r.residual_norm);
                Ok(Drift::Tabulated(r.drift))
            }
            "zero" => Ok(Drift::Zero),
            other => match other.strip_prefix("linear:") {
                Some(g) => Ok(Drift::Linear {
                    gamma: g.parse().map_err(|_| Error::Config(format!("{key}: bad gamma in '{other}'")))?,
                }),
                None => Err(Error::Config(format!("{key}: unknown drift '{other}'"))),
            },
        }
    }

    /// `point:<x>`, `target`, or `bump:<x0>:<width>:<lo>:<hi>`.
    fn initial(&self, key: &str, target: &TargetDensity) -> Result<Initial> {
        let v = self.str(key);
        if v == "target" {
            return Ok(Initial::Target(Box::new(target.clone())));
        }
        if let Some(x) = v.strip_prefix("point:").and_then(|s| s.parse::<f64>().ok()) {
            if x.is_finite() {
                return Ok(Initial::Point(x));
            }
        }
        if let Some(rest) = v.strip_prefix("bump:") {
            let p: Vec<f64> = rest.split(':').filter_map(|s| s.parse().ok()).collect();
            if let [x0, width, lo, hi] = p[..] {
                if width > 0.0 && lo < x0 && x0 < hi {
                    return Ok(Initial::Bump { x0, width, lo, hi });
                }
            }
        }
        Err(Error::Config(format!(
            "{key}: expected point:<x>, target or bump:<x0>:<width>:<lo>:<hi>, got '{v}'"
        )))
    }

    /// Expands `bump` or `bump:<x0>` to the full bump on the solver grid.
    fn expand_bump(&mut self, key: &str, spec: &GridSpec) -> Result<()> {
        let v = self.str(key).to_string();
        let x0 = match v.as_str() {
            "bump" => Some(0.0),
            other => other
                .strip_prefix("bump:")
                .filter(|r| !r.contains(':'))
                .map(|r| r.parse::<f64>().map_err(|_| Error::Config(format!("{key}: bad centre in '{v}'"))))
                .transpose()?,
        };
        if let Some(x0) = x0 {
            let width = self.f64("fpe.bump_width")?;
            self.fix(key, Initial::Bump { x0, width, lo: spec.x_min, hi: spec.x_max }.describe())?;
        }
        Ok(())
    }

    /// Gridded initial density matching `initial`.
    fn initial_density(&self, spec: &GridSpec, initial: &Initial, target: &TargetDensity) -> Result<GridFunction> {
        match initial {
            Initial::Target(_) => target.grid(spec.x_min, spec.x_max, spec.n),
            Initial::Bump { x0, width, lo, hi } => {
                if *lo != spec.x_min || *hi != spec.x_max {
                    return Err(Error::Config("the bump must span the solver window".into()));
                }
                cauchy_bump(spec, *x0, *width)
            }
            Initial::Point(_) => Err(Error::Config(
                "a point start is not representable on the grid; use bump or target".into(),
            )),
        }
    }

    fn histograms(&self, times: &[f64]) -> Result<(HistogramSpec, Vec<f64>)> {
        let spec = HistogramSpec::new(self.f64("hist.lo")?, self.f64("hist.hi")?, self.usize("hist.bins")?)?;
        let t_final = times.last().copied().unwrap_or(0.0);
        let at = match self.str("hist.times") {
            "final" => vec![t_final],
            list => list
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("hist.times: bad time '{s}'"))))
                .collect::<Result<Vec<_>>>()?,
        };
        if let Some(t) = at.iter().find(|t| !(**t >= 0.0 && **t <= t_final + 1e-9)) {
            return Err(Error::Config(format!("histogram time {t} outside [0, {t_final}]")));
        }
        Ok((spec, at))
    }

    fn ensemble_outputs(&mut self, prefix: &str, stats: &EnsembleStats, target: &TargetDensity) {
        let t_final = stats.times.last().copied().unwrap_or(0.0);
        let units = if stats.variance.is_some() {
            "t=time variance=length^2 variance_se=length^2 iqr=length median=length"
        } else {
            "t=time iqr=length median=length"
        };
        let header = self.header(units);
        self.emit(format!("{prefix}_stats.csv"), stats.to_csv(&header));
        for (k, h) in stats.histograms.iter().enumerate() {
            let header = self.header("bin_lo=length bin_hi=length count=paths density=1/length");
            self.emit(format!("{prefix}_hist_{k:03}.csv"), h.to_csv(&header));
        }
        self.diag("failed_paths", stats.failed_paths);
        if let Some((v, se)) = stats.saturated_variance(0.5 * t_final) {
            self.diag("saturated_variance", format!("{v:.6}"));
            self.diag("saturated_variance_se", format!("{se:.6}"));
        }
        if let Some(q) = stats.saturated_iqr(0.5 * t_final) {
            self.diag("saturated_iqr", format!("{q:.6}"));
        }
        if !stats.final_sorted.is_empty() {
            let ks = ks_statistic(&stats.final_sorted, |x| target.cdf(x));
            self.diag("final_ks_statistic", format!("{ks:.6}"));
            self.diag("ks_doubled_critical_1pct", format!("{:.6}", 2.0 * KS_CRITICAL_1PCT / (stats.final_sorted.len() as f64).sqrt()));
        }
    }

    fn solve_config(&mut self, mu: f64, lambda: f64, t_final: f64) -> Result<SolveConfig> {
        let mut sc = SolveConfig::new(mu, lambda, t_final)?;
        sc.grid = GridSpec::symmetric(self.f64("fpe.window")?, self.usize("fpe.n")?)?;
        sc.dt = self.f64("fpe.dt")?;
        sc.splitting = self.parse("fpe.splitting")?;
        sc.advection = self.parse("fpe.advection")?;
        sc.outside = self.parse("fpe.outside")?;
        sc.positivity_clip = self.cfg.bool("fpe.clip")?;
        if self.str("fpe.bump_width") == "auto" {
            self.fix("fpe.bump_width", 10.0 * sc.grid.h())?;
        }
        Ok(sc)
    }
}

fn cmd_sample(job: &mut Job) -> Result<()> {
    let params = StableParams::new(job.f64("sample.mu")?, job.f64("sample.scale")?)?;
    let n = job.usize("sample.n")?;
    if n == 0 {
        return Err(Error::Config("sample.n must be positive".into()));
    }
    let mut rng = RngStream::new(job.seed(), 0);
    let xs = sample_many(&params, n, &mut rng)?;
    let mut text = String::new();
    for h in job.header("x=length") {
        text.push_str(&format!("# {h}\n"));
    }
    text.push_str("# columns: x\n");
    for x in &xs {
        text.push_str(&format!("{x}\n"));
    }
    job.emit("samples.csv", text);
    let sorted = sorted_copy(&xs);
    job.diag("median", quantile_sorted(&sorted, 0.5));
    job.diag("iqr", iqr_sorted(&sorted));
    job.diag("empirical_char_fn_p1", empirical_char_fn(&xs, 1.0)?);
    job.diag("exact_char_fn_p1", char_fn(&params, 1.0));
    Ok(())
}

/// Power-law continuation fitted to the edge decay; constant edges give
/// `power:0`, edges at or below zero give `zero`.
pub fn detect_tail(f: &GridFunction) -> TailModel {
    let n = f.len();
    let v = f.values();
    if !(f.x_min() < 0.0 && f.x_max() > 0.0) {
        return TailModel::Zero;
    }
    let exponent = |edge: usize, half: usize| -> Option<f64> {
        let (a, b) = (v[edge], v[half]);
        let (xa, xb) = (f.x(edge).abs(), f.x(half).abs());
        if !(a > 0.0 && b > 0.0 && xb > 0.0 && xa > xb) {
            return None;
        }
        Some(((b / a).ln() / (xa / xb).ln()).max(0.0))
    };
    let half_l = f.nearest(0.5 * f.x_min()).unwrap_or(1);
    let half_r = f.nearest(0.5 * f.x_max()).unwrap_or(n - 2);
    match (exponent(0, half_l), exponent(n - 1, half_r)) {
        (Some(a), Some(b)) => {
            let p = a.min(b);
            // round so the echoed value reproduces the run exactly
            let p = (p * 1e6).round() / 1e6;
            TailModel::PowerLaw(if p < 1e-3 { 0.0 } else { p })
        }
        _ => TailModel::Zero,
    }
}

fn cmd_fraclap(job: &mut Job) -> Result<()> {
    let input = job.str("fraclap.input").to_string();
    if input.is_empty() {
        return Err(Error::Config("fraclap needs an input file (--input)".into()));
    }
    let text = std::fs::read_to_string(&input).map_err(|e| Error::Config(format!("cannot read {input}: {e}")))?;
    let f = GridFunction::from_csv(&text)?;
    let mu = job.f64("fraclap.mu")?;
    let method: Method = job.parse("fraclap.method")?;
    if job.str("fraclap.tail") == "auto" {
        let tail = match method {
            Method::PvQuadrature => detect_tail(&f),
            Method::Spectral => TailModel::Zero,
        };
        job.fix("fraclap.tail", tail)?;
    }
    let tail: TailModel = job.parse("fraclap.tail")?;
    let op = OperatorConfig::new(mu, method, tail)?;
    let g = match method {
        Method::PvQuadrature => frac_laplacian_pv(&f, &op)?,
        Method::Spectral => {
            let out = frac_laplacian_spectral(&f, &op)?;
            job.diag("boundary_ratio", out.boundary_ratio);
            if let Some(w) = out.truncation_warning {
                job.diag("truncation_warning", w);
            }
            out.result
        }
    };
    let mut header = job.header("x=length value=input/length^mu");
    header.push(format!("tail={tail}"));
    let csv = g.to_csv(mu, &method.to_string(), &header);
    job.emit("fraclap.csv", csv);
    Ok(())
}

fn cmd_reverse(job: &mut Job) -> Result<()> {
    let target = job.target()?;
    let (mu, lambda) = job.model(&target)?;
    let mut rc = ReverseConfig::new(mu, lambda)?
        .with_grid(GridSpec::symmetric(job.f64("reverse.window")?, job.usize("reverse.n")?)?);
    rc.symmetrize = job.cfg.bool("reverse.symmetrize")?;
    rc.richardson = job.cfg.bool("reverse.richardson")?;
    let r = reconstruct(&target, &rc)?;
    let mut header = job.header("x=length drift=length/time potential=1/time");
    header.push(format!(
        "diagnostics: residual_norm={:e} drift_asymmetry={:e} potential_asymmetry={:e}",
        r.residual_norm, r.drift_asymmetry, r.potential_asymmetry
    ));
    header.push(format!("tails: density={} root={}", r.density_tail, r.root_tail));
    let mut text = String::new();
    for h in &header {
        text.push_str(&format!("# {h}\n"));
    }
    text.push_str("# columns: x,drift,potential\n");
    for i in 0..r.drift.len() {
        text.push_str(&format!("{},{},{}\n", r.drift.x(i), r.drift.values()[i], r.potential.values()[i]));
    }
    job.emit("reverse.csv", text);
    job.diag("residual_norm", format!("{:e}", r.residual_norm));
    job.diag("drift_asymmetry", format!("{:e}", r.drift_asymmetry));
    job.diag("potential_asymmetry", format!("{:e}", r.potential_asymmetry));
    Ok(())
}

fn langevin_config(job: &mut Job, target: &TargetDensity, mu: f64, lambda: f64) -> Result<LangevinConfig> {
    let drift = job.drift("langevin.drift", target, mu, lambda)?;
    let mut lc = LangevinConfig::new(drift, mu, lambda);
    lc.dt = job.f64("langevin.dt")?;
    if job.str("langevin.scheme") == "auto" {
        job.fix("langevin.scheme", Scheme::default_for(&lc.drift))?;
    }
    lc.scheme = job.parse("langevin.scheme")?;
    lc.seed = job.seed();
    lc.workers = job.workers();
    Ok(lc)
}

fn semigroup_config(job: &mut Job, target: &TargetDensity, mu: f64, lambda: f64) -> Result<SemigroupConfig> {
    let mut sc = SemigroupConfig::new(target.clone(), mu, lambda, job.f64("semigroup.epsilon")?);
    if job.str("semigroup.domain_bound") == "auto" {
        job.fix("semigroup.domain_bound", sc.domain_bound)?;
    }
    sc.domain_bound = job.f64("semigroup.domain_bound")?;
    sc.cache_points = job.usize("semigroup.cache_points")?;
    sc.seed = job.seed();
    sc.workers = job.workers();
    Ok(sc)
}

fn cmd_sim_langevin(job: &mut Job) -> Result<()> {
    let target = job.target()?;
    let (mu, lambda) = job.model(&target)?;
    let mut lc = langevin_config(job, &target, mu, lambda)?;
    lc.t_final = job.f64("langevin.t_final")?;
    lc.n_paths = job.usize("langevin.paths")?;
    lc.initial = job.initial("langevin.initial", &target)?;
    let times = uniform_times(lc.t_final, job.usize("langevin.snapshots")?);
    let (spec, at) = job.histograms(&times)?;
    let stats = run_langevin_ensemble(&lc, &times, target.variance().is_some(), Some((spec, &at)))?;
    job.ensemble_outputs("langevin", &stats, &target);
    Ok(())
}

fn cmd_sim_semigroup(job: &mut Job) -> Result<()> {
    let target = job.target()?;
    let (mu, lambda) = job.model(&target)?;
    let mut sc = semigroup_config(job, &target, mu, lambda)?;
    sc.t_final = job.f64("semigroup.t_final")?;
    sc.n_paths = job.usize("semigroup.paths")?;
    sc.initial = job.initial("semigroup.initial", &target)?;
    let times = uniform_times(sc.t_final, job.usize("semigroup.snapshots")?);
    let (spec, at) = job.histograms(&times)?;
    let model = KmcModel::new(&sc)?;
    let (stats, counters) = run_semigroup_ensemble(&model, &times, target.variance().is_some(), Some((spec, &at)))?;
    job.ensemble_outputs("semigroup", &stats, &target);
    job.diag("jumps", counters.jumps);
    job.diag("acceptance", format!("{:.6}", counters.acceptance()));
    job.diag("envelope_violations", counters.envelope_violations);
    Ok(())
}

fn trajectory_outputs(job: &mut Job, form: &str, tr: &Trajectory, mu: f64) {
    let header = job.header("t=time mass=1 variance=length^2 l1_to_target=1");
    job.emit(format!("fpe_{form}_summary.csv"), tr.summary_csv(&header));
    for (k, snap) in tr.snapshots.iter().enumerate() {
        let mut header = job.header("x=length value=1/length");
        header.push(format!("t={}", snap.t));
        job.emit(format!("fpe_{form}_t{k:03}.csv"), snap.rho.to_csv(mu, &format!("{form}_fpe"), &header));
    }
    let drift = tr.snapshots.iter().map(|s| (s.mass - 1.0).abs()).fold(0.0, f64::max);
    job.diag(&format!("{form}_max_mass_error"), format!("{drift:e}"));
    job.diag(&format!("{form}_final_l1_to_target"), format!("{:e}", tr.last().l1_to_target));
    job.diag(&format!("{form}_final_variance"), format!("{:.6}", tr.last().variance));
    job.diag(&format!("{form}_max_courant"), format!("{:.3}", tr.max_courant));
    job.diag(&format!("{form}_clipped_mass"), format!("{:e}", tr.clipped_mass));
    job.diag(&format!("{form}_min_value"), format!("{:e}", tr.min_value));
}

fn cmd_solve_fpe(job: &mut Job) -> Result<()> {
    let target = job.target()?;
    let (mu, lambda) = job.model(&target)?;
    let t_final = job.f64("fpe.t_final")?;
    let mut sc = job.solve_config(mu, lambda, t_final)?;
    sc.snapshot_times = uniform_times(t_final, job.usize("fpe.snapshots")?);
    job.expand_bump("fpe.initial", &sc.grid)?;
    let initial = job.initial("fpe.initial", &target)?;
    let rho0 = job.initial_density(&sc.grid, &initial, &target)?;
    let form = job.str("fpe.form").to_string();
    let (langevin, semigroup) = match form.as_str() {
        "langevin" => (true, false),
        "semigroup" => (false, true),
        "both" => (true, true),
        other => return Err(Error::Config(format!("fpe.form: expected langevin, semigroup or both, got '{other}'"))),
    };
    let drift = if langevin {
        let d = job.drift("fpe.drift", &target, mu, lambda)?;
        Some(sc.grid.sample(|x| d.eval(x))?)
    } else {
        None
    };
    let mut results = Vec::new();
    if let Some(b) = &drift {
        results.push(("langevin", evolve_langevin_fpe(&rho0, b, &sc, Some(&target))?));
    }
    if semigroup {
        results.push(("semigroup", evolve_semigroup_fpe(&rho0, &target, &sc)?));
    }
    for (form, tr) in &results {
        trajectory_outputs(job, form, tr, mu);
    }
    Ok(())
}

fn cmd_compare_run(job: &mut Job) -> Result<()> {
    let target = job.target()?;
    let (mu, lambda) = job.model(&target)?;
    if job.str("compare.mode") == "auto" {
        job.fix("compare.mode", Dispersion::auto(&target))?;
    }
    let mode: Dispersion = job.parse("compare.mode")?;
    let t_final = job.f64("compare.t_final")?;
    let n_paths = job.usize("compare.paths")?;
    let solve = job.solve_config(mu, lambda, t_final)?;
    job.expand_bump("compare.initial", &solve.grid)?;
    let initial = job.initial("compare.initial", &target)?;
    let times = uniform_times(t_final, job.usize("compare.snapshots")?);
    let mut lc = langevin_config(job, &target, mu, lambda)?;
    let mut sc = semigroup_config(job, &target, mu, lambda)?;
    lc.t_final = t_final;
    sc.t_final = t_final;
    lc.n_paths = n_paths;
    sc.n_paths = n_paths;
    let pde = if job.cfg.bool("compare.pde")? {
        let drift = solve.grid.sample(|x| lc.drift.eval(x))?;
        let rho0 = job.initial_density(&solve.grid, &initial, &target)?;
        Some(PdeSetup { solve, drift, rho0 })
    } else {
        None
    };
    lc.initial = initial.clone();
    sc.initial = initial;
    let cmp = cmd_compare(&target, &lc, &sc, &times, mode, pde.as_ref())?;
    let header = job.header("");
    job.emit("compare.csv", cmp.to_csv(&header));
    job.emit("compare.gp", cmp.plot_script("compare.csv", target.name()));
    compare_diagnostics(job, &cmp, t_final);
    Ok(())
}

fn compare_diagnostics(job: &mut Job, cmp: &Comparison, t_final: f64) {
    let (a, _) = Comparison::curve(&cmp.langevin, cmp.mode);
    let (b, _) = Comparison::curve(&cmp.semigroup, cmp.mode);
    let from = 0.5 * t_final;
    job.diag("langevin_saturation", format!("{:.6}", Comparison::saturation(&a, &cmp.times, from)));
    job.diag("semigroup_saturation", format!("{:.6}", Comparison::saturation(&b, &cmp.times, from)));
    if let Some(z) = cmp.separation_z() {
        let (i, zmax) = z.iter().enumerate().fold((0, 0.0), |(bi, bz), (i, &v)| if v > bz { (i, v) } else { (bi, bz) });
        job.diag("max_separation_z", format!("{zmax:.3}"));
        job.diag("max_separation_t", cmp.times[i]);
    }
    if let (Some(p), Some(q)) = (&cmp.pde_langevin, &cmp.pde_semigroup) {
        job.diag("pde_langevin_saturation", format!("{:.6}", Comparison::saturation(p, &cmp.times, from)));
        job.diag("pde_semigroup_saturation", format!("{:.6}", Comparison::saturation(q, &cmp.times, from)));
    }
    job.diag("kmc_acceptance", format!("{:.6}", cmp.counters.acceptance()));
}
