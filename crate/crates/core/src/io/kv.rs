//! Line-oriented `key = value` text shared by dataset manifests and config
//! files. Blank lines and lines starting with `#` are ignored; keys may repeat.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    /// 1-based source line.
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<KvEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, Some(i + 1), format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::format(path, Some(i + 1), "empty key"));
        }
        out.push(KvEntry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<Vec<KvEntry>> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::format(path, Some(e.utf8_error().valid_up_to()), "not valid UTF-8"))?;
    parse_kv(&text, path)
}

/// Formats entries with LF line endings.
pub fn format_kv<'a>(entries: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

pub(crate) fn parse_value<T: std::str::FromStr>(entry: &KvEntry, path: &Path) -> Result<T> {
    entry
        .value
        .parse()
        .map_err(|_| Error::format(path, Some(entry.line), format!("bad value `{}` for `{}`", entry.value, entry.key)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_repeats() {
        let p = Path::new("x");
        let e = parse_kv("# c\n\na = 1\nb=two words \na = 3\r\n", p).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!((e[1].key.as_str(), e[1].value.as_str(), e[1].line), ("b", "two words", 4));
        assert_eq!(e[2].value, "3");
        assert!(matches!(parse_kv("a = 1\nnovalue\n", p), Err(Error::Format { location: Some(2), .. })));
    }

    #[test]
    fn format_then_parse() {
        let text = format_kv([("k", "v".to_string()), ("n", "2".to_string())]);
        assert_eq!(text, "k = v\nn = 2\n");
        assert_eq!(parse_kv(&text, Path::new("x")).unwrap().len(), 2);
    }
}
