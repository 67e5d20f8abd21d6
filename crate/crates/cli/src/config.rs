//! Flat `key = value` configuration with strict key checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{config_err, CliError, CliResult};

/// Raw entries plus the resolved values read so far.
///
/// Every getter records the value it settles on (defaults included), and
/// [`Config::finish`] rejects keys that no getter asked for.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: Map<String, Value>,
}

fn split_entry(line: &str) -> CliResult<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| config_err(format!("expected key=value, got `{line}`")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(config_err(format!("empty key in `{line}`")));
    }
    Ok((k.to_string(), v.to_string()))
}

impl Config {
    /// Reads `file` (if any), then applies `overrides` on top.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut cfg = Config::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            cfg.parse_text(&text)?;
        }
        for o in overrides {
            let (k, v) = split_entry(o)?;
            cfg.entries.insert(k, v);
        }
        Ok(cfg)
    }

    pub fn parse_text(&mut self, text: &str) -> CliResult<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                split_entry(line).map_err(|e| config_err(format!("line {}: {e}", lineno + 1)))?;
            if self.entries.insert(k.clone(), v).is_some() {
                return Err(config_err(format!(
                    "line {}: duplicate key `{k}`",
                    lineno + 1
                )));
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Raw string without recording it.
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.resolved.insert(key.to_string(), v);
    }

    /// Parsed value without recording it.
    pub fn parse_opt<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("`{key}`: cannot parse `{raw}`"))),
        }
    }

    pub fn get_or<T: FromStr + Serialize + Clone>(
        &mut self,
        key: &str,
        default: T,
    ) -> CliResult<T> {
        let v = self.parse_opt(key)?.unwrap_or(default);
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn required<T: FromStr + Serialize + Clone>(&mut self, key: &str) -> CliResult<T> {
        let v: T = self
            .parse_opt(key)?
            .ok_or_else(|| config_err(format!("missing required key `{key}`")))?;
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> String {
        let v = self.take(key).unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    /// Comma-separated list.
    pub fn list_or(&mut self, key: &str, default: &[&str]) -> Vec<String> {
        let v: Vec<String> = match self.take(key) {
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            None => default.iter().map(|s| s.to_string()).collect(),
        };
        self.record(key, &v);
        v
    }

    /// Value of whichever of two alternative keys is present, never both.
    pub fn either<T: FromStr>(&mut self, a: &str, b: &str) -> CliResult<Option<(bool, T)>> {
        if self.has(a) && self.has(b) {
            return Err(config_err(format!(
                "`{a}` and `{b}` are alternatives; give at most one"
            )));
        }
        if let Some(v) = self.parse_opt(a)? {
            return Ok(Some((true, v)));
        }
        Ok(self.parse_opt(b)?.map(|v| (false, v)))
    }

    /// Output prefix; its directory must exist.
    pub fn output_prefix(&mut self, default: &str) -> CliResult<PathBuf> {
        let raw = self.string_or("output", default);
        let path = PathBuf::from(&raw);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(config_err(format!(
                    "`output`: directory {} does not exist",
                    parent.display()
                )));
            }
        }
        Ok(path)
    }

    /// Optional output prefix; `None` means standard output.
    pub fn optional_output(&mut self) -> CliResult<Option<PathBuf>> {
        if !self.has("output") {
            self.record("output", Value::Null);
            return Ok(None);
        }
        self.output_prefix("").map(Some)
    }

    /// Fails on keys nobody consumed; returns the resolved configuration.
    pub fn finish(self) -> CliResult<Map<String, Value>> {
        let unknown: Vec<&String> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            let names: Vec<String> = unknown.iter().map(|k| format!("`{k}`")).collect();
            return Err(config_err(format!("unknown key(s) {}", names.join(", "))));
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        let mut c = Config::default();
        c.parse_text(text).unwrap();
        c
    }

    #[test]
    fn comments_blank_lines_and_defaults() {
        let mut c = cfg("# run\n\ndim = 12  # levels\nmodel=breuer\n");
        assert_eq!(c.get_or("dim", 20usize).unwrap(), 12);
        assert_eq!(c.string_or("model", "gup-markov"), "breuer");
        assert_eq!(c.get_or("seed", 7u64).unwrap(), 7);
        let resolved = c.finish().unwrap();
        assert_eq!(resolved["seed"], 7);
        assert_eq!(resolved["dim"], 12);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let mut c = cfg("dim = 4\ncolour = red\n");
        c.get_or("dim", 2usize).unwrap();
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");

        let mut c = Config::default();
        assert!(c.parse_text("a=1\na=2").is_err());
        assert!(c.parse_text("no equals sign").is_err());
    }

    #[test]
    fn alternatives_are_exclusive() {
        let mut c = cfg("kappa = 1\nomega_tau_g = 5");
        assert!(c.either::<f64>("kappa", "omega_tau_g").is_err());
        let mut c = cfg("omega_tau_g = 5");
        assert_eq!(
            c.either::<f64>("kappa", "omega_tau_g").unwrap(),
            Some((false, 5.0))
        );
    }

    #[test]
    fn bad_numbers_name_the_field() {
        let mut c = cfg("dim = twelve");
        let err = c.get_or("dim", 20usize).unwrap_err().to_string();
        assert!(err.contains("`dim`"), "{err}");
    }
}
