//! Sectioned `key = value` text shared by config files and model artifacts.

use std::collections::HashSet;
use std::fmt::{Display, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

/// Parses `[section]` headers and `key = value` lines. Blank lines and lines
/// starting with `#` are skipped. `first_line` is the line number of the
/// first line of `text`.
pub(crate) fn parse(text: &str, first_line: usize) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    let mut seen_sections = HashSet::new();
    let mut seen_keys = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = first_line + i;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(inner) = s.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, msg: "unterminated section header".into() })?
                .trim();
            if name.is_empty() {
                return Err(Error::Parse { line, msg: "empty section name".into() });
            }
            if !seen_sections.insert(name.to_string()) {
                return Err(Error::Parse { line, msg: format!("duplicate section [{name}]") });
            }
            seen_keys.clear();
            sections.push(Section { name: name.to_string(), entries: Vec::new() });
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, got `{s}`") })?;
        let key = key.trim();
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::Parse { line, msg: format!("key `{key}` outside any section") })?;
        if key.is_empty() {
            return Err(Error::Parse { line, msg: "empty key".into() });
        }
        if !seen_keys.insert(key.to_string()) {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
        section.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
    }
    Ok(sections)
}

/// Typed, consuming access to one section's entries; [`finish`](Self::finish)
/// rejects whatever was not read.
pub(crate) struct Reader {
    section: String,
    entries: Vec<Option<Entry>>,
}

impl Reader {
    pub fn new(section: Section) -> Self {
        Self { section: section.name, entries: section.entries.into_iter().map(Some).collect() }
    }

    pub fn empty(name: &str) -> Self {
        Self { section: name.to_string(), entries: Vec::new() }
    }

    fn qualified(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    pub fn raw(&mut self, key: &str) -> Option<String> {
        self.entries
            .iter_mut()
            .find(|e| e.as_ref().is_some_and(|e| e.key == key))
            .and_then(Option::take)
            .map(|e| e.value)
    }

    pub fn opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                v.parse().map(Some).map_err(|_| Error::config(key, format!("cannot parse `{v}` in [{}]", self.section)))
            }
        }
    }

    pub fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.opt(key)?.ok_or_else(|| Error::config(self.qualified(key), "missing"))
    }

    pub fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse_list(&v)
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse list `{v}` in [{}]", self.section))),
        }
    }

    pub fn require_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.list(key)?.ok_or_else(|| Error::config(self.qualified(key), "missing"))
    }

    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().flatten().next() {
            None => Ok(()),
            Some(e) => Err(Error::config(e.key, format!("unknown key in [{}] (line {})", self.section, e.line))),
        }
    }
}

pub(crate) fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| p.trim().parse().map_err(|_| ())).collect()
}

/// Splits parsed sections into readers by name; unknown sections are errors.
pub(crate) fn take_sections(sections: Vec<Section>, known: &[&str]) -> Result<Vec<Reader>> {
    let mut out: Vec<Reader> = known.iter().map(|k| Reader::empty(k)).collect();
    for s in sections {
        match known.iter().position(|k| *k == s.name) {
            Some(i) => out[i] = Reader::new(s),
            None => return Err(Error::config(format!("[{}]", s.name), "unknown section")),
        }
    }
    Ok(out)
}

pub(crate) struct Writer {
    out: String,
}

impl Writer {
    pub fn new() -> Self {
        Self { out: String::new() }
    }

    pub fn line(&mut self, s: &str) {
        self.out.push_str(s);
        self.out.push('\n');
    }

    pub fn section(&mut self, name: &str) {
        if !self.out.is_empty() && !self.out.ends_with("\n\n") {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "[{name}]");
    }

    pub fn entry(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.out, "{key} = {value}");
    }

    pub fn list<T: Display>(&mut self, key: &str, values: &[T]) {
        self.entry(key, join(values.iter()));
    }

    /// Floats with 17 significant digits, which round-trip exactly.
    pub fn exact(&mut self, key: &str, values: &[f64]) {
        self.entry(key, join(values.iter().map(|v| format!("{v:.16e}"))));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub(crate) fn join<T: Display>(values: impl Iterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}
