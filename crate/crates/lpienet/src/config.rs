//! `key=value` text configuration, shared by training configs, degradation
//! sidecars and checkpoint metadata.
//!
//! One entry per line, `#` starts a comment, blank lines ignored. Entry order
//! is preserved on write.

use crate::error::{Error, Result};

/// Ordered key=value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap {
    entries: Vec<(String, String)>,
}

impl KvMap {
    pub fn new() -> Self {
        KvMap::default()
    }

    pub fn parse(text: &str) -> Result<KvMap> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                )));
            };
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(KvMap { entries })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_string(), value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Start consuming entries; [`KvReader::finish`] rejects leftovers.
    pub fn reader(self) -> KvReader {
        KvReader {
            entries: self.entries,
            taken: Vec::new(),
        }
    }
}

/// Consuming reader over a [`KvMap`] that tracks which keys were used.
#[derive(Debug)]
pub struct KvReader {
    entries: Vec<(String, String)>,
    taken: Vec<String>,
}

impl KvReader {
    pub fn take(&mut self, key: &str) -> Option<String> {
        if let Some(pos) = self.entries.iter().position(|(k, _)| k == key) {
            let (k, v) = self.entries.remove(pos);
            self.taken.push(k);
            Some(v)
        } else {
            None
        }
    }

    pub fn take_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("key `{key}`: cannot parse value `{v}`"))
            }),
        }
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                other => Err(Error::Config(format!(
                    "key `{key}`: expected a boolean, got `{other}`"
                ))),
            },
        }
    }

    /// Remaining (unconsumed) entries, for layered decoding.
    pub fn remaining(self) -> KvMap {
        KvMap {
            entries: self.entries,
        }
    }

    /// Error on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        if let Some((k, _)) = self.entries.first() {
            return Err(Error::UnknownConfigKey(k.clone()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_comments_and_blanks() {
        let m = KvMap::parse("# header\n\nlr0=0.002\n  batch_size = 4 \n").unwrap();
        assert_eq!(m.get("lr0"), Some("0.002"));
        assert_eq!(m.get("batch_size"), Some("4"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let m = KvMap::parse("lr0=0.002\nbogus=7\n").unwrap();
        let mut r = m.reader();
        let _: Option<f64> = r.take_parse("lr0").unwrap();
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn malformed_line_is_an_error() {
        assert!(KvMap::parse("no_equals_here\n").is_err());
    }

    #[test]
    fn roundtrip_preserves_order() {
        let mut m = KvMap::new();
        m.set("b", 2);
        m.set("a", 1);
        m.set("b", 3);
        let t = m.to_text();
        assert_eq!(t, "b=3\na=1\n");
        assert_eq!(KvMap::parse(&t).unwrap(), m);
    }
}
