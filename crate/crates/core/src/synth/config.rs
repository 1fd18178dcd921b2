//! Flat `key = value` config files.
//!
//! One pair per line. Blank lines and lines starting with `#` are skipped,
//! as is anything after a `#` on a line. Keys may appear only once.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("bad key {key:?}"),
                });
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line_no, value.to_string()))
            {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("{key} already set on line {first}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| Error::Config {
                line: *line,
                reason: format!("cannot parse {key} = {value:?}"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("missing required key {key}"),
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|(k, _)| !allowed.contains(&k.as_str()))
        {
            Some((k, (line, _))) => Err(Error::Config {
                line: *line,
                reason: format!("unknown key {k}"),
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# scene\n width = 32 \n\nheight=16 # rows\n").unwrap();
        assert_eq!(kv.require::<usize>("width").unwrap(), 32);
        assert_eq!(kv.get::<usize>("height").unwrap(), Some(16));
        assert_eq!(kv.get::<usize>("depth").unwrap(), None);
        assert_eq!(kv.get_or("depth", 3usize).unwrap(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = KeyValues::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = KeyValues::parse("a = 1\na = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let kv = KeyValues::parse("a = x\n").unwrap();
        assert!(matches!(
            kv.require::<u32>("a"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(kv.check_keys(&["b"]).is_err());
        assert!(KeyValues::parse("bad key = 1").is_err());
    }
}
