//! `key = value` text files. Blank lines and `#` comments are ignored; repeated
//! keys are kept in order.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: Vec<Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    reason: "empty key".into(),
                });
            }
            entries.push(Entry {
                line,
                key: key.to_owned(),
                value: value.trim().to_owned(),
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Removes and returns the last entry for `key`, dropping earlier duplicates.
    pub fn take(&mut self, key: &str) -> Option<Entry> {
        let mut found = None;
        self.entries.retain(|e| {
            if e.key == key {
                found = Some(e.clone());
                false
            } else {
                true
            }
        });
        found
    }

    /// Removes and returns every entry for `key`, in file order.
    pub fn take_all(&mut self, key: &str) -> Vec<Entry> {
        let (hit, rest): (Vec<_>, Vec<_>) = self.entries.drain(..).partition(|e| e.key == key);
        self.entries = rest;
        hit
    }

    pub fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| Error::Config {
                line: e.line,
                reason: format!("cannot parse value {:?} for key {key:?}", e.value),
            }),
        }
    }

    /// Errors on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some(e) => Err(Error::Config {
                line: e.line,
                reason: format!("unknown key {:?}", e.key),
            }),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_duplicates() {
        let mut kv = KeyValues::parse("# header\na = 1\n\nb=two # trailing\na = 3\n").unwrap();
        assert_eq!(kv.take_parsed::<u32>("a").unwrap(), Some(3));
        assert_eq!(kv.take("b").unwrap().value, "two");
        assert!(kv.take("a").is_none());
        kv.finish().unwrap();
    }

    #[test]
    fn reports_line_numbers() {
        match KeyValues::parse("a = 1\nnonsense\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let mut kv = KeyValues::parse("x = 1\ny = q").unwrap();
        assert!(matches!(kv.take_parsed::<f64>("y"), Err(Error::Config { line: 2, .. })));
        match kv.finish() {
            Err(Error::Config { line, reason }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("x"));
            }
            other => panic!("{other:?}"),
        }
    }
}
