//! Flat `section.key = value` text format shared by experiment configs and
//! machine definitions.
//!
//! One assignment per line. `#` starts a comment that runs to the end of the
//! line. Keys consist of ASCII letters, digits, `_` and `.`; every key may be
//! assigned once.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    /// 1-based.
    pub line: usize,
    /// 1-based column of the first value character.
    pub value_column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for KvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for KvError {}

pub fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Parses every line, reporting all malformed lines and duplicate keys.
pub fn parse(text: &str) -> Result<Vec<KvEntry>, Vec<KvError>> {
    let mut entries: Vec<KvEntry> = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            errors.push(KvError {
                line,
                column,
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let key_part = &content[..eq];
        let key = key_part.trim();
        let key_column = key_part.len() - key_part.trim_start().len() + 1;
        if key.is_empty() {
            errors.push(KvError {
                line,
                column: eq + 1,
                message: "missing key before `=`".into(),
            });
            continue;
        }
        if let Some((off, bad)) = key.char_indices().find(|(_, c)| !is_key_char(*c)) {
            errors.push(KvError {
                line,
                column: key_column + off,
                message: format!("invalid character `{bad}` in key `{key}`"),
            });
            continue;
        }
        let value_part = &content[eq + 1..];
        let value = value_part.trim();
        let value_column = eq + 2 + (value_part.len() - value_part.trim_start().len());
        if let Some(first) = entries.iter().find(|e| e.key == key) {
            errors.push(KvError {
                line,
                column: key_column,
                message: format!(
                    "duplicate key `{key}` (first defined on line {}, again on line {line})",
                    first.line
                ),
            });
            continue;
        }
        entries.push(KvEntry {
            key: key.to_owned(),
            value: value.to_owned(),
            line,
            value_column,
        });
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(errors)
    }
}
