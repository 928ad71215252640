//! Line-oriented `key=value` records shared by the vector, snapshot and
//! report formats. `#` starts a comment line.

use std::collections::BTreeMap;

use crate::error::Error;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Record {
    fields: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.fields.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, Error> {
        self.get(key)
            .ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_map(&self) -> BTreeMap<&str, &str> {
        self.fields().collect()
    }

    /// Parses one line. Returns `Ok(None)` for blank and comment lines.
    pub fn parse_line(line: &str) -> Result<Option<Self>, Error> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let mut record = Record::new();
        for token in line.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{token}`")))?;
            if k.is_empty() {
                return Err(Error::Parse(format!("empty key in `{token}`")));
            }
            if record.get(k).is_some() {
                return Err(Error::Parse(format!("duplicate field `{k}`")));
            }
            record.push(k, v);
        }
        Ok(Some(record))
    }
}

impl std::fmt::Display for Record {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Parses every record in `text`, tagging errors with their line number.
pub fn parse_records(text: &str) -> Result<Vec<(usize, Record)>, Error> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        match Record::parse_line(line) {
            Ok(Some(r)) => out.push((idx + 1, r)),
            Ok(None) => {}
            Err(Error::Parse(msg)) => return Err(Error::Parse(format!("line {}: {msg}", idx + 1))),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let r = Record::parse_line("a=1 b=xyz").unwrap().unwrap();
        assert_eq!(r.get("b"), Some("xyz"));
        assert_eq!(r.to_string(), "a=1 b=xyz");
        assert!(Record::parse_line("  # note").unwrap().is_none());
        assert!(Record::parse_line("").unwrap().is_none());
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(Record::parse_line("a=1 junk").is_err());
        assert!(Record::parse_line("a=1 a=2").is_err());
        assert!(Record::parse_line("=3").is_err());
        let err = parse_records("a=1\n\nbad\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
