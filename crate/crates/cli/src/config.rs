//! Flat `key = value` configuration files.
//!
//! Keys are the long names of the command-line flags. Blank lines and lines
//! starting with `#` are ignored. A flag given on the command line wins over
//! the same key in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const KEYS: &[&str] = &[
    "out",
    "seed",
    "repeats",
    "workers",
    "trace-phers",
    "evap",
    "deposit",
    "plateau",
    "max-ticks",
    "max-agents",
    "kernel-size",
    "query-size",
    "data-size",
    "vocab",
    "ablate",
    "scenario",
    "query",
    "data",
    "sweep",
    "grid",
    "vocabs",
    "large",
];

#[derive(Debug, Default)]
pub struct Config {
    source: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                bail!("line {}: unknown key `{k}`", i + 1);
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                bail!("line {}: key `{k}` given twice", i + 1);
            }
        }
        Ok(Self { source: None, values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        debug_assert!(KEYS.contains(&key), "{key} is not a config key");
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| {
                    let file = self
                        .source
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_default();
                    anyhow!("{file}: bad value `{v}` for `{key}`: {e}")
                })
            })
            .transpose()
    }

    /// The command-line value if present, else the file value.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Boolean switches: set on the command line, or `true` in the file.
    pub fn flag(&self, cli: bool, key: &str) -> Result<bool> {
        Ok(cli || self.get::<bool>(key)?.unwrap_or(false))
    }
}

/// Comma-separated list, e.g. `2000,10000,100000`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow!("bad list entry `{x}`: {e}")))
        .collect()
}
