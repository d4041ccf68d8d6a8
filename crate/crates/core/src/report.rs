//! Run reports and output bookkeeping.
//!
//! A report is itself a valid configuration file: the resolved inputs come
//! first, followed by `[report]`, `[diagnostics]` and `[outputs]` sections that
//! the configuration loader skips. Feeding a report back through `--config`
//! therefore repeats the run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::rng::STREAM_LAYOUT;

pub const REPORT_FILE: &str = "run_report.txt";

/// Writes output files into one directory and records their digests.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents.as_bytes())?;
        self.files.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: Config,
    pub outputs: Vec<(String, String)>,
    pub diagnostics: Vec<(String, String)>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn new(config: Config) -> Self {
        Self { config, outputs: Vec::new(), diagnostics: Vec::new(), wall_clock_s: 0.0 }
    }

    pub fn diagnostic(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# levylab run report\n");
        s.push_str(&self.config.render());
        let _ = writeln!(s, "[report]");
        let _ = writeln!(s, "config_hash = {}", self.config.hash());
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "stream_layout = {STREAM_LAYOUT}");
        let _ = writeln!(s, "wall_clock_s = {:.3}", self.wall_clock_s);
        if !self.diagnostics.is_empty() {
            let _ = writeln!(s, "[diagnostics]");
            for (k, v) in &self.diagnostics {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        if !self.outputs.is_empty() {
            let _ = writeln!(s, "[outputs]");
            for (i, (name, digest)) in self.outputs.iter().enumerate() {
                let _ = writeln!(s, "file_{i:03} = {name} sha256:{digest}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_reloads_as_its_config() {
        let mut cfg = Config::new();
        cfg.set("run.seed", "7").unwrap();
        cfg.set("model.mu", "1").unwrap();
        let mut r = RunReport::new(cfg.clone());
        r.diagnostic("residual_norm", 1e-6);
        r.outputs.push(("a.csv".into(), "00".into()));
        let back = Config::parse(&r.render()).unwrap().without_report_sections();
        assert_eq!(back, cfg);
    }

    #[test]
    fn outputs_record_digests() {
        let dir = std::env::temp_dir().join(format!("levylab-report-{}", std::process::id()));
        let mut out = Outputs::new(&dir).unwrap();
        out.write("x.csv", "1,2\n").unwrap();
        assert_eq!(out.files()[0].1, sha256_hex(b"1,2\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
