//! Flat `key = value` run configuration: defaults, then an optional file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ccresp::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    ignored: Vec<String>,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected `key = value`", n + 1)))?;
        let k = k.trim().replace('-', "_");
        if k.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("config line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Merges `defaults < file < flags`. File keys the command does not know
    /// are kept aside and reported, so one file can serve several commands.
    pub fn resolve(defaults: &[(&str, &str)], file: Option<&Path>, flags: Vec<(&str, Option<String>)>) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut ignored = Vec::new();
        if let Some(path) = file {
            for (k, v) in parse_config(&crate::commands::read_text(path)?)? {
                match values.get_mut(&k) {
                    Some(slot) => *slot = v,
                    None => ignored.push(k),
                }
            }
        }
        for (k, v) in flags {
            debug_assert!(values.contains_key(k), "flag `{k}` has no default");
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { values, ignored })
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key);
        raw.parse()
            .map_err(|_| Error::Invalid(format!("config `{key}`: cannot parse `{raw}`")))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" | "" => Ok(false),
            other => Err(Error::Invalid(format!("config `{key}`: expected a boolean, got `{other}`"))),
        }
    }

    /// `None` for an empty value.
    pub fn path(&self, key: &str) -> Option<&Path> {
        let v = self.str(key);
        (!v.is_empty()).then(|| Path::new(v))
    }

    pub fn required_path(&self, key: &str) -> Result<&Path> {
        self.path(key)
            .ok_or_else(|| Error::Invalid(format!("`{key}` is required")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.str(key)
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("config `{key}`: cannot parse `{s}`")))
            })
            .collect()
    }

    /// Resolved settings as `config.key=value` lines.
    pub fn echo(&self) -> String {
        let mut s: String = self
            .values
            .iter()
            .map(|(k, v)| format!("config.{k}={v}\n"))
            .collect();
        for k in &self.ignored {
            s.push_str(&format!("config.ignored={k}\n"));
        }
        s
    }
}
