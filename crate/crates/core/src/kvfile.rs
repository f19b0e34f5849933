//! Plain-text `key=value` files: one entry per line, `#` starts a comment.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a key=value document into entries. Duplicate keys are an error.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: format!("expected key=value, got `{content}`"),
        })?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config {
                line,
                msg: "empty key".into(),
            });
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        out.push(Entry {
            line,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn float(&self) -> Result<f64> {
        let v: f64 = self.value.parse().map_err(|_| self.bad("a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad("a finite number"))
        }
    }

    /// Non-negative integer; scientific notation such as `1e5` is accepted.
    pub fn count(&self) -> Result<u64> {
        if let Ok(v) = self.value.parse::<u64>() {
            return Ok(v);
        }
        let v = self.float().map_err(|_| self.bad("a non-negative integer"))?;
        if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
            return Err(self.bad("a non-negative integer"));
        }
        Ok(v as u64)
    }

    pub fn flag(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(self.bad("a boolean")),
        }
    }

    pub(crate) fn bad(&self, expected: &str) -> Error {
        Error::Config {
            line: self.line,
            msg: format!("`{}` expects {expected}, got `{}`", self.key, self.value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_values() {
        let e = parse("# header\n\na = 1.5 # trailing\nb=1e5\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].line, 3);
        assert_eq!(e[0].float().unwrap(), 1.5);
        assert_eq!(e[1].count().unwrap(), 100_000);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        match parse("a=1\nnot a pair\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("a=1\na=2\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let e = parse("n=2.5").unwrap();
        assert!(e[0].count().is_err());
    }
}
