//! Sectioned `key = value` experiment files.
//!
//! ```text
//! [mercer]
//! r = 2.0
//! [experiment]
//! s = 0.8
//! seeds = 42, 43, 44
//! [grid]
//! lambda_count = 50
//! ```
//!
//! `#` starts a comment. Unknown sections or keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::{ContourSpec, UcurveConfig};
use crate::error::{Error, Result};

const SCHEMA: &[(&str, &[&str])] = &[
    ("mercer", &["r", "domain_lo", "domain_hi"]),
    (
        "experiment",
        &["s", "s_prime", "t_f", "t_g", "n", "sigma2", "seeds", "replicates", "grid_size", "d_gen", "mu_max"],
    ),
    (
        "grid",
        &["lambda_lo_exp", "lambda_hi_exp", "lambda_count", "ratio_lo_exp", "ratio_hi_exp", "ratio_count", "d_lo", "d_hi", "d_count"],
    ),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<(String, String), String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                let known = SCHEMA.iter().find(|(s, _)| *s == name);
                section = Some(known.map(|(s, _)| *s).ok_or_else(|| Error::Config(format!("line {ln}: unknown section [{name}]")))?);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {ln}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| Error::Config(format!("line {ln}: `{key}` appears before any section")))?;
            let keys = SCHEMA.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !keys.contains(&key) {
                return Err(Error::Config(format!("line {ln}: unknown key `{key}` in [{sec}]")));
            }
            if values.insert((sec.to_string(), key.to_string()), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {ln}: duplicate key `{key}` in [{sec}]")));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.raw(section, key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    pub fn seeds(&self) -> Result<Option<Vec<u64>>> {
        self.raw("experiment", "seeds").map(parse_seed_list).transpose()
    }

    fn set<T: FromStr>(&self, section: &str, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(section, key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Overlays the file's values on `cfg`.
    pub fn apply_ucurve(&self, cfg: &mut UcurveConfig) -> Result<()> {
        self.set("mercer", "r", &mut cfg.r)?;
        self.set("mercer", "domain_lo", &mut cfg.domain_lo)?;
        self.set("mercer", "domain_hi", &mut cfg.domain_hi)?;
        self.set("experiment", "s", &mut cfg.s)?;
        self.set("experiment", "s_prime", &mut cfg.s_prime)?;
        self.set("experiment", "t_f", &mut cfg.t_f)?;
        self.set("experiment", "t_g", &mut cfg.t_g)?;
        self.set("experiment", "n", &mut cfg.n)?;
        self.set("experiment", "sigma2", &mut cfg.sigma2)?;
        self.set("experiment", "replicates", &mut cfg.replicates)?;
        self.set("experiment", "grid_size", &mut cfg.grid_size)?;
        self.set("grid", "lambda_lo_exp", &mut cfg.lambda_lo_exp)?;
        self.set("grid", "lambda_hi_exp", &mut cfg.lambda_hi_exp)?;
        self.set("grid", "lambda_count", &mut cfg.lambda_count)?;
        if let Some(seeds) = self.seeds()? {
            cfg.seeds = seeds;
        }
        Ok(())
    }

    pub fn apply_contour(&self, spec: &mut ContourSpec) -> Result<()> {
        self.set("mercer", "r", &mut spec.r)?;
        self.set("experiment", "n", &mut spec.n)?;
        self.set("experiment", "sigma2", &mut spec.sigma2)?;
        self.set("experiment", "d_gen", &mut spec.d_gen)?;
        self.set("experiment", "mu_max", &mut spec.mu_max)?;
        self.set("grid", "ratio_lo_exp", &mut spec.ratio_lo_exp)?;
        self.set("grid", "ratio_hi_exp", &mut spec.ratio_hi_exp)?;
        self.set("grid", "ratio_count", &mut spec.ratio_count)?;
        self.set("grid", "d_lo", &mut spec.d_lo)?;
        self.set("grid", "d_hi", &mut spec.d_hi)?;
        self.set("grid", "d_count", &mut spec.d_count)?;
        Ok(())
    }
}

/// Comma-separated list of unsigned seeds.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let seeds = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|_| Error::Config(format!("seeds: cannot parse {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("seeds: empty list".into()));
    }
    Ok(seeds)
}
