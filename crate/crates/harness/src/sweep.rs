//! One-parameter sweeps. Each run writes only into its own directory.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, LoadedConfig};
use crate::run::run_simulation;
use crate::HarnessError;

pub const SWEEP_INDEX_FILE: &str = "sweep.json";

/// `KEY=lo:hi:steps`, `steps` evenly spaced values including both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct VarySpec {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl VarySpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + (self.hi - self.lo) * i as f64 / last).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarySpecError(String);

impl fmt::Display for VarySpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected KEY=lo:hi:steps, {}", self.0)
    }
}

impl std::error::Error for VarySpecError {}

impl FromStr for VarySpec {
    type Err = VarySpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |m: &str| VarySpecError(m.to_string());
        let (key, range) = s.split_once('=').ok_or_else(|| err("missing `=`"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, steps] = parts[..] else { return Err(err("range needs three `:`-separated parts")) };
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite());
        let lo = num(lo).ok_or_else(|| err("lo is not a number"))?;
        let hi = num(hi).ok_or_else(|| err("hi is not a number"))?;
        let steps: usize = steps.trim().parse().map_err(|_| err("steps is not a positive integer"))?;
        if steps == 0 {
            return Err(err("steps must be at least 1"));
        }
        if key.trim().is_empty() {
            return Err(err("KEY is empty"));
        }
        Ok(Self { key: key.trim().to_string(), lo, hi, steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub key: String,
    pub value: f64,
    /// Run directory, relative to the sweep directory.
    pub dir: String,
    pub config_hash: String,
    /// `ok`, `aborted` or `error`.
    pub status: String,
    pub error: Option<String>,
}

/// Validates every point up front, then runs them concurrently.
pub fn run_sweep(base: &LoadedConfig, vary: &VarySpec, out_dir: &Path) -> Result<Vec<SweepEntry>, HarnessError> {
    let configs = vary
        .values()
        .into_iter()
        .map(|v| config::with_value(&base.canonical, &vary.key, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    let entries: Vec<SweepEntry> = configs
        .par_iter()
        .enumerate()
        .map(|(index, (value, cfg))| {
            let dir = format!("run_{index:03}");
            let (status, error) = match run_simulation(cfg, &out_dir.join(&dir)) {
                Ok(m) if m.aborted.is_some() => ("aborted", None),
                Ok(_) => ("ok", None),
                Err(e) => ("error", Some(e.to_string())),
            };
            SweepEntry {
                index,
                key: vary.key.clone(),
                value: *value,
                dir,
                config_hash: cfg.hash.clone(),
                status: status.to_string(),
                error,
            }
        })
        .collect();
    let path = out_dir.join(SWEEP_INDEX_FILE);
    let text = serde_json::to_string_pretty(&entries).expect("sweep entries serialize");
    std::fs::write(&path, text + "\n").map_err(|source| HarnessError::Io { path, source })?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_spaces_values() {
        let v: VarySpec = "nx=15:31:3".parse().unwrap();
        assert_eq!(v, VarySpec { key: "nx".into(), lo: 15.0, hi: 31.0, steps: 3 });
        assert_eq!(v.values(), vec![15.0, 23.0, 31.0]);
        let one: VarySpec = "dt=0.01:0.5:1".parse().unwrap();
        assert_eq!(one.values(), vec![0.01]);
        for bad in ["nx", "nx=1:2", "nx=1:2:0", "nx=a:2:3", "=1:2:3", "nx=1:2:3:4", "nx=1:inf:2"] {
            assert!(bad.parse::<VarySpec>().is_err(), "{bad}");
        }
    }
}
