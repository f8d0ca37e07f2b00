//! Plain-text `key = value` files: one pair per line, `#` starts a comment,
//! blank lines are ignored.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, found {content:?}") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { line, message: "empty key".into() });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Parse { line, message: format!("duplicate key {key:?}") });
        }
        out.push(Entry { line, key: key.to_string(), value: value.trim().to_string() });
    }
    Ok(out)
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e| Error::Parse { line: self.line, message: format!("{}: {e}", self.key) })
    }

    pub fn unknown(&self) -> Error {
        Error::Parse { line: self.line, message: format!("unknown key {:?}", self.key) }
    }
}
