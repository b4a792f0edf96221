// SPDX-License-Identifier: Apache-2.0

//! Flat `key = value` configuration files.
//!
//! One pair per line; blank lines and lines starting with `#` are skipped.
//! Later duplicates override earlier ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| Error::InvalidConfig(format!("{key}={raw}: {e}")))
            })
            .transpose()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let map = KvMap::parse("a = 1\n\n# skip\nb=x\na=2\n").unwrap();
        assert_eq!(map.get("a"), Some("2"));
        assert_eq!(map.get_parsed::<u32>("a").unwrap(), Some(2));
        assert_eq!(map.get_parsed::<u32>("missing").unwrap(), None);
        assert!(map.get_parsed::<u32>("b").is_err());
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KvMap::parse("oops\n").is_err());
        assert!(KvMap::parse("=1\n").is_err());
    }
}
