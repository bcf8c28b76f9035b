//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value   # trailing comment
//! ```
//!
//! Commands read the keys they understand through [`Config::section`]; any
//! key left unread when [`Config::finish`] runs is rejected.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    used: RefCell<BTreeSet<(String, String)>>,
    hash: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {line}: unterminated section header")))?
                    .trim();
                if name.is_empty() {
                    return Err(CliError::Config(format!("line {line}: empty section name")));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`")))?;
            let section = current
                .clone()
                .ok_or_else(|| CliError::Config(format!("line {line}: key outside any [section]")))?;
            let key = key.trim().to_string();
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = sections.entry(section.clone()).or_default().insert(key.clone(), entry) {
                return Err(CliError::Config(format!(
                    "line {line}: [{section}] {key} already set on line {}",
                    prev.line
                )));
            }
        }
        Ok(Self {
            sections,
            used: RefCell::new(BTreeSet::new()),
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    /// SHA-256 of the raw config text.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn section<'a>(&'a self, name: &'a str) -> Section<'a> {
        Section { config: self, name }
    }

    /// Fail on sections or keys that no command consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for (section, entries) in &self.sections {
            for (key, entry) in entries {
                if !used.contains(&(section.clone(), key.clone())) {
                    return Err(CliError::Config(format!(
                        "line {}: unknown key `{key}` in [{section}]",
                        entry.line
                    )));
                }
            }
        }
        Ok(())
    }
}

pub struct Section<'a> {
    config: &'a Config,
    name: &'a str,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&Entry> {
        let entry = self.config.sections.get(self.name)?.get(key)?;
        self.config
            .used
            .borrow_mut()
            .insert((self.name.to_string(), key.to_string()));
        Some(entry)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|_| {
            CliError::Config(format!(
                "line {}: cannot parse [{}] {key} = `{}`",
                entry.line, self.name, entry.value
            ))
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key [{}] {key}", self.name)))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        entry
            .value
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    CliError::Config(format!("line {}: bad list item `{}` in [{}] {key}", entry.line, v.trim(), self.name))
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Frequency given in Hz, returned as angular frequency in rad/s.
    pub fn angular_hz(&self, key: &str) -> Result<Option<f64>, CliError> {
        Ok(self.get::<f64>(key)?.map(|f| 2.0 * std::f64::consts::PI * f))
    }
}
