//! Flat `key = value` configuration files with `key = [a, b, c]` arrays.
//! Command-line flags override file values; every value actually used is
//! recorded so outputs can embed the resolved configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, Vec<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            let value = value.trim();
            let items = if let Some(inner) = value.strip_prefix('[') {
                let inner = inner.strip_suffix(']').ok_or_else(|| anyhow!("line {}: unterminated array", lineno + 1))?;
                inner.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            } else {
                vec![value.to_string()]
            };
            if values.insert(key.clone(), items).is_some() {
                bail!("line {}: duplicate key '{key}'", lineno + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Merges defaults, file values and flags, in increasing priority.
#[derive(Debug, Default)]
pub struct Resolver {
    file: ConfigFile,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, Value>,
}

fn parse_item<T: FromStr>(key: &str, s: &str) -> Result<T>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| anyhow!("config key '{key}': cannot parse '{s}': {e}"))
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Self { file, ..Self::default() }
    }

    fn file_values<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.file.values.get(key) {
            None => Ok(None),
            Some(items) => Ok(Some(items.iter().map(|s| parse_item(key, s)).collect::<Result<_>>()?)),
        }
    }

    fn record(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.to_string(), value);
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Clone + serde::Serialize,
        T::Err: Display,
    {
        let from_file = self.file_values::<T>(key)?;
        let value = match (flag, from_file) {
            (Some(v), _) => Some(v),
            (None, Some(mut items)) => {
                if items.len() != 1 {
                    bail!("config key '{key}' expects a single value");
                }
                items.pop()
            }
            (None, None) => None,
        };
        self.record(key, serde_json::to_value(&value)?);
        Ok(value)
    }

    pub fn scalar<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Clone + serde::Serialize,
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.record(key, serde_json::to_value(&value)?);
        Ok(value)
    }

    pub fn list<T>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr + Clone + serde::Serialize,
        T::Err: Display,
    {
        let from_file = self.file_values::<T>(key)?;
        let value = flag.or(from_file).unwrap_or(default);
        self.record(key, serde_json::to_value(&value)?);
        Ok(value)
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool> {
        let value = flag || self.file_values::<bool>(key)?.is_some_and(|v| v.iter().any(|&b| b));
        self.record(key, Value::Bool(value));
        Ok(value)
    }

    /// Fails on file keys that the subcommand never asked for.
    pub fn finish(self) -> Result<BTreeMap<String, Value>> {
        let unknown: Vec<&String> = self.file.values.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            bail!("unknown config keys for this subcommand: {unknown:?}");
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_arrays_and_comments() {
        let cfg = ConfigFile::parse("# grid\nbeta = [0.5, 1.0 ,2]\nd=3 # degree\nrecord-stride = 10\n").unwrap();
        let mut r = Resolver::new(cfg);
        assert_eq!(r.list::<f64>("beta", None, vec![]).unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(r.scalar("d", None, 4usize).unwrap(), 3);
        assert_eq!(r.scalar("record_stride", Some(7u64), 1).unwrap(), 7);
        assert_eq!(r.scalar("n", None, 64usize).unwrap(), 64);
        let resolved = r.finish().unwrap();
        assert_eq!(resolved["record_stride"], Value::from(7));
        assert_eq!(resolved["n"], Value::from(64));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigFile::parse("beta 1.0").is_err());
        assert!(ConfigFile::parse("beta = [1, 2").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let mut r = Resolver::new(ConfigFile::parse("beta = x").unwrap());
        assert!(r.scalar("beta", None, 1.0f64).is_err());
        let r = Resolver::new(ConfigFile::parse("typo = 1").unwrap());
        assert!(r.finish().is_err());
    }

    #[test]
    fn empty_array_is_an_empty_list() {
        let mut r = Resolver::new(ConfigFile::parse("n = []").unwrap());
        assert!(r.list::<usize>("n", None, vec![1]).unwrap().is_empty());
    }
}
