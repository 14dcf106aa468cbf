//! Settings resolution: command-line flags over a `key=value` file over
//! built-in defaults, and the `#` header that records the outcome.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    File,
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "flag",
            Source::File => "file",
            Source::Default => "default",
        })
    }
}

/// Values read from a config file, keyed by flag name without the dashes.
/// Values taken from a header written by this tool keep their recorded
/// source, so a rerun reproduces the header.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, (String, Source)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Accepts `key = value` lines with `#` comments. A file written by this
    /// tool is also accepted: its `# config.key=value (source)` header lines
    /// are read and everything after the header is skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut from_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let mut source = Source::File;
            let entry = if let Some(rest) = line.strip_prefix("# config.") {
                from_header = true;
                match rest.rfind(" (") {
                    Some(p) if rest.ends_with(')') => {
                        source = match &rest[p + 2..rest.len() - 1] {
                            "flag" => Source::Flag,
                            "default" => Source::Default,
                            _ => Source::File,
                        };
                        &rest[..p]
                    }
                    _ => rest,
                }
            } else if line.is_empty() || line.starts_with('#') {
                continue;
            } else if from_header {
                break;
            } else {
                line
            };
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got '{raw}'", i + 1)))?;
            values.insert(key.trim().to_string(), (value.trim().to_string(), source));
        }
        Ok(ConfigFile { values })
    }
}

/// Resolved settings of one run, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: Vec<(String, String, Source)>,
}

impl Settings {
    /// Resolves every key of `defaults` and rejects file or flag keys the
    /// command does not know.
    pub fn resolve(
        defaults: &[(&str, String)],
        flags: &BTreeMap<String, String>,
        file: &ConfigFile,
    ) -> Result<Self, CliError> {
        let known = |k: &str| defaults.iter().any(|(d, _)| *d == k);
        for key in flags.keys() {
            if !known(key) {
                return Err(CliError::Usage(format!("--{key} does not apply to this command")));
            }
        }
        for key in file.values.keys() {
            if !known(key) {
                return Err(CliError::Usage(format!(
                    "config key '{key}' does not apply to this command"
                )));
            }
        }
        let entries = defaults
            .iter()
            .map(|(key, default)| {
                let (value, source) = if let Some(v) = flags.get(*key) {
                    (v.clone(), Source::Flag)
                } else if let Some((v, source)) = file.values.get(*key) {
                    (v.clone(), *source)
                } else {
                    (default.clone(), Source::Default)
                };
                (key.to_string(), value, source)
            })
            .collect();
        Ok(Settings { entries })
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
            .unwrap_or_else(|| panic!("setting '{key}' was not declared"))
    }

    /// Overrides a value after resolution, keeping its source.
    pub fn set(&mut self, key: &str, value: String) {
        if let Some(e) = self.entries.iter_mut().find(|(k, _, _)| k == key) {
            e.1 = value;
        }
    }

    #[cfg(test)]
    pub fn source(&self, key: &str) -> Option<Source> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, _, s)| *s)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let v = self.get(key);
        v.parse()
            .map_err(|e| CliError::Usage(format!("invalid value '{v}' for {key}: {e}")))
    }

    pub fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        split_list(self.get(key))
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Usage(format!("invalid entry '{s}' in {key}: {e}")))
            })
            .collect()
    }

    /// Writes the metadata header: tool version, timestamp, seed and every
    /// resolved setting with its source.
    pub fn write_header(&self, mut w: impl Write, command: &str) -> io::Result<()> {
        writeln!(w, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# command={command}")?;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(w, "# timestamp={now}")?;
        if let Some((_, seed, _)) = self.entries.iter().find(|(k, _, _)| k == "seed") {
            writeln!(w, "# seed={seed}")?;
        }
        for (k, v, s) in &self.entries {
            writeln!(w, "# config.{k}={v} ({s})")?;
        }
        Ok(())
    }
}

pub fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Formats numbers as a comma-separated list.
pub fn join_numbers(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Vec<(&'static str, String)> {
        vec![("n", "15".into()), ("reps", "1000".into()), ("seed", "1".into())]
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = ConfigFile::parse("# comment\nreps = 500\nseed=9\n").unwrap();
        let flags = BTreeMap::from([("seed".to_string(), "3".to_string())]);
        let s = Settings::resolve(&defaults(), &flags, &file).unwrap();
        assert_eq!((s.get("n"), s.source("n")), ("15", Some(Source::Default)));
        assert_eq!((s.get("reps"), s.source("reps")), ("500", Some(Source::File)));
        assert_eq!((s.get("seed"), s.source("seed")), ("3", Some(Source::Flag)));
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let file = ConfigFile::parse("bogus=1").unwrap();
        assert!(Settings::resolve(&defaults(), &BTreeMap::new(), &file).is_err());
        assert!(ConfigFile::parse("just words").is_err());
    }

    #[test]
    fn header_round_trips() {
        let file = ConfigFile::parse("reps=200").unwrap();
        let s = Settings::resolve(&defaults(), &BTreeMap::new(), &file).unwrap();
        let mut buf = Vec::new();
        s.write_header(&mut buf, "binomial").unwrap();
        let text = String::from_utf8(buf).unwrap() + "study,n\nbinomial,15\n";
        let again = Settings::resolve(&defaults(), &BTreeMap::new(), &ConfigFile::parse(&text).unwrap()).unwrap();
        for key in ["n", "reps", "seed"] {
            assert_eq!(again.get(key), s.get(key));
            assert_eq!(again.source(key), s.source(key));
        }
    }
}
