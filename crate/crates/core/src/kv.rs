//! Line-oriented `key = value` text used by scenario and configuration files.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after
//! a `#` on a value line. Keys are unique; indexed sections are spelled as
//! dotted keys (`harmonic.1.order`) or suffixed keys (`gamma_c_3`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvDoc {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if entries
                .insert(key.to_string(), (value.to_string(), line_no))
                .is_some()
            {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(_, l)| *l)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(*line, format!("cannot parse value `{v}` for `{key}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::MissingKey {
            path: None,
            key: key.to_string(),
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Collect the indices `i` for which `prefix.i.<anything>` exists, sorted.
    pub fn section_indices(&self, prefix: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let head = format!("{prefix}.");
        for (key, (_, line)) in &self.entries {
            if let Some(rest) = key.strip_prefix(&head) {
                let idx = rest.split('.').next().unwrap_or("");
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::parse(*line, format!("bad section index in `{key}`")))?;
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Error on any key not accepted by `known`.
    pub fn reject_unknown(&self, known: impl Fn(&str) -> bool) -> Result<()> {
        for (key, (_, line)) in &self.entries {
            if !known(key) {
                return Err(Error::parse(*line, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }
}

/// Accumulates `key = value` lines with canonical float formatting.
#[derive(Debug, Default)]
pub struct KvWriter {
    buf: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.buf, "# {text}");
        self
    }

    pub fn blank(&mut self) -> &mut Self {
        self.buf.push('\n');
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_f64(value));
        self
    }

    pub fn int(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {value}");
        self
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {value}");
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Shortest representation that parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
