//! Flat `key = value` configuration with `[section]` headers.
//!
//! Keys are addressed as `section.key`. Lines before the first header belong
//! to `[run]`. `#` starts a comment. The canonical rendering sorts sections
//! and keys, so equal configurations hash equally regardless of file layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sections written by run reports that carry results, not inputs.
pub const REPORT_SECTIONS: [&str; 3] = ["report", "diagnostics", "outputs"];

/// Keys that do not influence any output bytes and stay out of the hash.
pub const UNHASHED_KEYS: [&str; 2] = ["run.workers", "run.out_dir"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        let mut section = "run".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse(format!("line {}: unterminated section header", lineno + 1)))?
                    .trim();
                if !valid_name(name) {
                    return Err(Error::Parse(format!("line {}: bad section name '{name}'", lineno + 1)));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !valid_name(k) {
                return Err(Error::Parse(format!("line {}: bad key '{k}'", lineno + 1)));
            }
            let key = format!("{section}.{k}");
            if cfg.entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {key}", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets `section.key`; the key must be qualified.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        match key.split_once('.') {
            Some((s, k)) if valid_name(s) && valid_name(k) => {
                self.entries.insert(key.to_string(), value.into());
                Ok(())
            }
            _ => Err(Error::Config(format!("key '{key}' must have the form section.key"))),
        }
    }

    /// Parses and applies `section.key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected section.key=value, got '{assignment}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Entries of one section as `(key, value)` without the prefix.
    pub fn section<'a>(&'a self, name: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |(k, v)| {
            let (s, key) = k.split_once('.')?;
            (s == name).then_some((key, v.as_str()))
        })
    }

    pub fn section_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.entries.keys().filter_map(|k| k.split_once('.').map(|(s, _)| s)).collect();
        names.dedup();
        names
    }

    /// Drops the sections that run reports add on top of the inputs.
    pub fn without_report_sections(mut self) -> Self {
        self.entries
            .retain(|k, _| !REPORT_SECTIONS.iter().any(|s| k.split_once('.').is_some_and(|(sec, _)| sec == *s)));
        self
    }

    /// Canonical text: sections and keys in sorted order.
    pub fn render(&self) -> String {
        self.render_filtered(|_| true)
    }

    fn render_filtered(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut out = String::new();
        let mut current = "";
        for (k, v) in &self.entries {
            if !keep(k) {
                continue;
            }
            let (s, key) = k.split_once('.').unwrap_or(("run", k));
            if s != current {
                let _ = writeln!(out, "[{s}]");
                current = s;
            }
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical rendering, without
    /// the keys that cannot change outputs.
    pub fn hash(&self) -> String {
        let text = self.render_filtered(|k| !UNHASHED_KEYS.contains(&k));
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// Typed lookup of a key that must be present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| Error::Config(format!("missing key {key}")))?;
        raw.parse::<T>().map_err(|e| Error::Config(format!("{key} = {raw}: {e}")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(other) => Err(Error::Config(format!("{key} = {other}: expected true or false"))),
            None => Err(Error::Config(format!("missing key {key}"))),
        }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let c = Config::parse("seed = 3 # inline\n[target]\nname = quadratic_cauchy\n\n[model]\nmu=1\n").unwrap();
        assert_eq!(c.get("run.seed"), Some("3"));
        assert_eq!(c.get("target.name"), Some("quadratic_cauchy"));
        assert_eq!(c.parsed::<f64>("model.mu").unwrap(), 1.0);
        assert_eq!(c.section_names(), vec!["model", "run", "target"]);
    }

    #[test]
    fn render_round_trips_and_hash_ignores_layout() {
        let a = Config::parse("[b]\ny = 2\n[a]\nx = 1\n").unwrap();
        let b = Config::parse("[a]\nx=1\n[b]\ny=2").unwrap();
        assert_eq!(a.render(), "[a]\nx = 1\n[b]\ny = 2\n");
        assert_eq!(Config::parse(&a.render()).unwrap(), a);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.set("run.workers", "8").unwrap();
        assert_eq!(a.hash(), c.hash());
        c.set("a.x", "1.5").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("[oops\n").is_err());
        assert!(Config::parse("novalue\n").is_err());
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::new().set("unqualified", "1").is_err());
    }

    #[test]
    fn report_sections_are_dropped() {
        let c = Config::parse("[model]\nmu = 1\n[report]\nwall_clock_s = 3\n[outputs]\nf = x.csv\n").unwrap();
        let c = c.without_report_sections();
        assert_eq!(c.render(), "[model]\nmu = 1\n");
    }
}
