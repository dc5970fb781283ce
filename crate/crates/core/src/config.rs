//! `key = value` configuration files with command-line style overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Flat string map; typed access happens at the point of use.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut c = Config::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(path, n + 1, "expected key = value"))?;
            c.values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::InvalidInput(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed value, or `default` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|e| Error::InvalidInput(format!("config {key} = {v:?}: {e}"))),
        }
    }

    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = Config::parse("# c\nmixtures = 4\nalpha=1.5 # trailing\n\n", Path::new("c")).unwrap();
        assert_eq!(c.get("mixtures", 32usize).unwrap(), 4);
        assert_eq!(c.get("alpha", 0.0f64).unwrap(), 1.5);
        assert_eq!(c.get("missing", 7u32).unwrap(), 7);
        c.set_pair("mixtures=8").unwrap();
        assert_eq!(c.get("mixtures", 0usize).unwrap(), 8);
        assert!(c.get::<usize>("alpha", 0).is_err());
        assert!(Config::parse("novalue\n", Path::new("c")).is_err());
        assert_eq!(Config::parse(&c.to_text(), Path::new("c")).unwrap(), c);
    }
}
