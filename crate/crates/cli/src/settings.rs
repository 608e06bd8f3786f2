//! Layered key=value settings: command-line flags over an optional config
//! file over built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values. Exit code 2.
    Usage(String),
    /// IO, parse or filter failure. Exit code 1.
    Runtime(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, (String, Source)>,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected key=value, found '{raw}'", i + 1));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    /// `defaults` lists every accepted key. Keys absent from it are rejected
    /// wherever they come from.
    pub fn resolve(
        defaults: &[(&str, &str)],
        config: Option<&Path>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, (String, Source)> = defaults
            .iter()
            .map(|(k, v)| (k.to_string(), (v.to_string(), Source::Default)))
            .collect();

        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let entries = parse_config(&text)
                .map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
            for (k, v) in entries {
                match values.get_mut(&k) {
                    Some(slot) => *slot = (v, Source::File),
                    None => return usage(format!("{}: unknown key '{k}'", path.display())),
                }
            }
        }

        for (k, v) in flags {
            if let Some(v) = v {
                match values.get_mut(k) {
                    Some(slot) => *slot = (v, Source::Flag),
                    None => return usage(format!("unknown key '{k}'")),
                }
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> &str {
        // every key read by a command is in its defaults table
        &self.values.get(key).unwrap_or_else(|| panic!("undeclared key {key}")).0
    }

    #[cfg(test)]
    pub fn source(&self, key: &str) -> Source {
        self.values[key].1
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let raw = self.raw(key);
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => usage(format!("{key}: '{raw}' is not a finite number")),
        }
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            usage(format!("{key} must be positive, got {v}"))
        }
    }

    pub fn non_negative(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            usage(format!("{key} must be non-negative, got {v}"))
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let raw = self.raw(key);
        raw.parse()
            .or_else(|_| usage(format!("{key}: '{raw}' is not an unsigned integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => usage(format!("{key}: '{other}' is not a boolean")),
        }
    }

    /// Comma-separated `start:end` windows.
    pub fn windows(&self, key: &str) -> Result<Vec<(f64, f64)>, CliError> {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',').map(|w| parse_window(key, w.trim())).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Source)> {
        self.values.iter().map(|(k, (v, s))| (k.as_str(), v.as_str(), *s))
    }
}

fn parse_window(key: &str, w: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("{key}: '{w}' is not a start:end window"));
    let (a, b) = w.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
        return usage(format!("{key}: window '{w}' must satisfy 0 <= start < end"));
    }
    Ok((a, b))
}

/// Deterministic `key=value` manifest: settings in key order, then extras.
pub fn manifest(settings: &Settings, extras: &[(&str, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("tool=navfuse {}\n", env!("CARGO_PKG_VERSION")));
    for (k, v, s) in settings.iter() {
        out.push_str(&format!("{k}={v}\n"));
        out.push_str(&format!("{k}.source={s}\n"));
    }
    for (k, v) in extras {
        out.push_str(&format!("{k}={v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULTS: &[(&str, &str)] = &[("a", "1"), ("b", "2"), ("c", "")];

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# comment\na = 10\nb=20 # trailing\n\n").unwrap();
        let s = Settings::resolve(DEFAULTS, Some(&cfg), vec![("b", Some("200".into())), ("c", None)]).unwrap();
        assert_eq!(s.raw("a"), "10");
        assert_eq!(s.source("a"), Source::File);
        assert_eq!(s.raw("b"), "200");
        assert_eq!(s.source("b"), Source::Flag);
        assert_eq!(s.raw("c"), "");
        assert_eq!(s.source("c"), Source::Default);
    }

    #[test]
    fn unknown_key_in_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "zzz=1\n").unwrap();
        assert!(matches!(
            Settings::resolve(DEFAULTS, Some(&cfg), vec![]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn malformed_line() {
        assert!(parse_config("just words").is_err());
        assert!(parse_config("=3").is_err());
    }

    #[test]
    fn windows() {
        let s = Settings::resolve(&[("w", "30:40, 50:55.5")], None, vec![]).unwrap();
        assert_eq!(s.windows("w").unwrap(), vec![(30.0, 40.0), (50.0, 55.5)]);
        let s = Settings::resolve(&[("w", "40:30")], None, vec![]).unwrap();
        assert!(s.windows("w").is_err());
    }

    #[test]
    fn manifest_is_sorted() {
        let s = Settings::resolve(&[("z", "1"), ("a", "2")], None, vec![]).unwrap();
        let m = manifest(&s, &[("origin_lat_deg", "49".into())]);
        let keys: Vec<&str> = m.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(keys, vec!["tool", "a", "a.source", "z", "z.source", "origin_lat_deg"]);
    }
}
