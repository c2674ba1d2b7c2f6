//! Run configuration: experiment name, parameter map, output settings.
//!
//! Parameters arrive as `key=value` pairs, either on the command line or
//! from an optional config file; command-line pairs override the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Seed used when none is supplied, so default runs are reproducible.
pub const DEFAULT_SEED: u64 = 1905;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: String,
    pub parameters: BTreeMap<String, String>,
    pub out: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Parse a `key=value` pair.
pub fn parse_pair(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => bail!("malformed parameter `{raw}`; expected key=value"),
    }
}

/// Read a config file of `key = value` lines (`#` starts a comment).
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_pair(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        map.insert(k, v);
    }
    Ok(map)
}

/// Typed accessor over the parameter map. Every valid key must be read
/// through one of the getters; `finish()` then rejects any leftover key
/// with the list of recognized names.
pub struct Params<'a> {
    experiment: &'a str,
    map: &'a BTreeMap<String, String>,
    recognized: BTreeSet<String>,
}

impl<'a> Params<'a> {
    pub fn new(experiment: &'a str, map: &'a BTreeMap<String, String>) -> Self {
        Params {
            experiment,
            map,
            recognized: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.recognized.insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("parameter {key}={v} is not a number")),
        }
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("parameter {key}={v} is not a nonnegative integer")),
        }
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.recognized.contains(key) {
                bail!(
                    "unknown parameter `{key}` for experiment `{}`; valid parameters: {}",
                    self.experiment,
                    self.recognized
                        .iter()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
        }
        Ok(())
    }
}

/// A grid of `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        bail!("invalid range [{lo}, {hi}]; need finite min < max");
    }
    if steps < 2 {
        bail!("need at least 2 grid steps, got {steps}");
    }
    let h = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps).map(|k| lo + h * k as f64).collect())
}

/// A grid of `steps` logarithmically spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        bail!("invalid range [{lo}, {hi}]; need 0 < min < max");
    }
    Ok(linear_grid(lo.ln(), hi.ln(), steps)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse_and_reject() {
        assert_eq!(
            parse_pair("n = 10").unwrap(),
            ("n".to_string(), "10".to_string())
        );
        assert!(parse_pair("n").is_err());
        assert!(parse_pair("=3").is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let mut map = BTreeMap::new();
        map.insert("bogus".to_string(), "1".to_string());
        let mut p = Params::new("demo", &map);
        p.f64("r_min", 0.1).unwrap();
        let err = p.finish().unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("r_min"));
    }

    #[test]
    fn grids_hit_endpoints() {
        let g = linear_grid(0.1, 0.9, 9).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[0] - 0.1).abs() < 1e-12 && (g[8] - 0.9).abs() < 1e-12);
        let lg = log_grid(1.0, 16.0, 5).unwrap();
        assert!((lg[4] - 16.0).abs() < 1e-9 && (lg[2] - 4.0).abs() < 1e-9);
    }
}
