//! Flat `key = value` configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! present when a command reads it; there are no silent defaults, so a run
//! is fully described by its file plus overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ranker::config_hash;

/// The configuration shipped with the crate; matches the synthetic benchmark
/// defaults used throughout the examples and tests.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.conf");

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedLine {
                line: n + 1,
                reason: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::MalformedLine {
                    line: n + 1,
                    reason: "empty key".into(),
                });
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::MalformedLine {
                    line: n + 1,
                    reason: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("bundled config parses")
    }

    /// Overrides (or adds) one key.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| Error::BadValue {
            key: key.to_string(),
            value: raw.to_string(),
        })
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| Error::BadValue {
                    key: key.to_string(),
                    value: raw.to_string(),
                })
            })
            .collect()
    }

    /// `none` (any case) maps to `None`.
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.raw(key)?.eq_ignore_ascii_case("none") {
            return Ok(None);
        }
        self.get(key).map(Some)
    }

    /// Hash over the given keys, which must all be present.
    pub fn hash(&self, keys: &[&str]) -> Result<String> {
        let entries = keys
            .iter()
            .map(|k| Ok((*k, self.raw(k)?.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(config_hash(&entries))
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

/// Applies `--key value` and `--key=value` pairs in order.
pub fn apply_overrides<S: AsRef<str> + Display>(cfg: &mut Config, args: &[S]) -> Result<()> {
    let mut i = 0;
    while i < args.len() {
        let arg = args[i].as_ref();
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::InvalidParameter(format!("expected `--key value`, got `{arg}`")))?;
        if let Some((k, v)) = flag.split_once('=') {
            cfg.set(k.replace('-', "_"), v);
            i += 1;
        } else {
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::InvalidParameter(format!("`--{flag}` needs a value")))?;
            cfg.set(flag.replace('-', "_"), value.as_ref());
            i += 2;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# run\n seed = 7 \n\nbeta=0.2\nmode = single-granular=W\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), 7);
        assert_eq!(c.get::<f64>("beta").unwrap(), 0.2);
        assert_eq!(c.raw("mode").unwrap(), "single-granular=W");
    }

    #[test]
    fn missing_key_is_named() {
        let c = Config::parse("seed = 1\n").unwrap();
        let err = c.get::<f64>("beta").unwrap_err();
        assert!(matches!(err, Error::MissingKey(ref k) if k == "beta"));
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn bad_values_and_lines_are_rejected() {
        let c = Config::parse("seed = seven\n").unwrap();
        assert!(matches!(c.get::<u64>("seed"), Err(Error::BadValue { .. })));
        assert!(Config::parse("just words\n").is_err());
        assert!(Config::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = Config::parse("seed = 1\nmode = full\n").unwrap();
        apply_overrides(&mut c, &["--seed", "9", "--mode=greedy", "--new-key", "x"]).unwrap();
        assert_eq!(c.raw("seed").unwrap(), "9");
        assert_eq!(c.raw("mode").unwrap(), "greedy");
        assert_eq!(c.raw("new_key").unwrap(), "x");
        assert!(apply_overrides(&mut c, &["seed", "1"]).is_err());
        assert!(apply_overrides(&mut c, &["--seed"]).is_err());
    }

    #[test]
    fn lists_and_optionals() {
        let c = Config::parse("ks = 5, 10\nfloor = none\nempty =\n").unwrap();
        assert_eq!(c.list::<usize>("ks").unwrap(), vec![5, 10]);
        assert_eq!(c.optional::<f64>("floor").unwrap(), None);
        assert!(c.list::<usize>("empty").unwrap().is_empty());
    }

    #[test]
    fn hash_depends_on_selected_keys_only() {
        let a = Config::parse("x = 1\ny = 2\n").unwrap();
        let b = Config::parse("x = 1\ny = 3\n").unwrap();
        assert_eq!(a.hash(&["x"]).unwrap(), b.hash(&["x"]).unwrap());
        assert_ne!(a.hash(&["x", "y"]).unwrap(), b.hash(&["x", "y"]).unwrap());
        assert!(a.hash(&["z"]).is_err());
    }

    #[test]
    fn bundled_config_round_trips() {
        let c = Config::default_config();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }
}
