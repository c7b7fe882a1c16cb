//! Line-oriented `key = value` text with optional `[section]` headers.
//!
//! Shared by docking config files and pipeline manifests. `#` starts a comment
//! line; blank lines are ignored.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct KeyValueError {
    pub line: usize,
    pub message: String,
}

impl KeyValueError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        KeyValueError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Section { line: usize, name: String },
    Pair { line: usize, key: String, value: String },
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, KeyValueError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| KeyValueError::new(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(KeyValueError::new(line, "empty section name"));
            }
            entries.push(Entry::Section {
                line,
                name: name.split_whitespace().collect::<Vec<_>>().join(" "),
            });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| KeyValueError::new(line, format!("expected key = value, got {trimmed:?}")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KeyValueError::new(line, "missing key"));
        }
        entries.push(Entry::Pair {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

/// Parse a value, reporting the key and line on failure.
pub fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, KeyValueError> {
    value
        .parse()
        .map_err(|_| KeyValueError::new(line, format!("invalid value {value:?} for {key}")))
}

/// Decimal rendering with at least one fractional digit that parses back to
/// the same `f64`.
pub fn format_decimal(value: f64) -> String {
    let text = value.to_string();
    if value.is_finite() && !text.contains('.') {
        format!("{text}.0")
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_pairs() {
        let entries = parse_entries("# c\n[receptor  MRJP1]\npath = a b.pdb\n\nx=1\n").unwrap();
        assert_eq!(
            entries,
            vec![
                Entry::Section { line: 2, name: "receptor MRJP1".into() },
                Entry::Pair { line: 3, key: "path".into(), value: "a b.pdb".into() },
                Entry::Pair { line: 5, key: "x".into(), value: "1".into() },
            ]
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_entries("a = 1\nnonsense\n").unwrap_err().line, 2);
        assert_eq!(parse_entries("[open\n").unwrap_err().line, 1);
        assert_eq!(parse_entries(" = 3").unwrap_err().line, 1);
    }

    #[test]
    fn decimals() {
        assert_eq!(format_decimal(10.0), "10.0");
        assert_eq!(format_decimal(-3.0), "-3.0");
        assert_eq!(format_decimal(12.5), "12.5");
        assert_eq!(format_decimal(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_decimal(-0.0), "-0.0");
    }
}
