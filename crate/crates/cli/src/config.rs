//! Flat `key = value` settings. Precedence, lowest first: command defaults,
//! `--config` file, `--set` pairs, named flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use pnpgl::{Error, Result};

/// Every key accepted in a config file or by `--set`.
pub const KEYS: &[&str] = &[
    "seed",
    "n",
    "image",
    "out",
    "h",
    "patch",
    "spatial_sigma",
    "search_radius",
    "alpha",
    "sigma_eta",
    "alpha_min",
    "alpha_max",
    "alpha_points",
    "sigma_eps",
    "rates",
    "bandwidths",
    "mu0",
    "rho",
    "rate",
    "tol",
    "max_iters",
    "provenance",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// ignored; a repeated key keeps its last value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "line {}: expected key = value, got '{line}'",
                    no + 1
                ))
            })?;
            s.set(k.trim(), v.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", no + 1)))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// `key=value` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got '{pair}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<()> {
        match value {
            Some(v) => self.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::InvalidConfig(format!("cannot parse {key} = '{v}'")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Optional value where the literal `none` clears it.
    pub fn get_optional(&self, key: &str, default: Option<f64>) -> Result<Option<f64>> {
        match self.raw(key) {
            Some("none") => Ok(None),
            Some(_) => Ok(self.get(key)?),
            None => Ok(default),
        }
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidConfig(format!("cannot parse {key} entry '{}'", t.trim()))
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Formats a list the way [`Settings::list`] reads it.
pub fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}
