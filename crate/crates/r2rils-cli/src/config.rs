//! Flat key=value config files. Command-line flags override file values;
//! within a file the last occurrence of a key wins.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    /// Reads a config file, rejecting keys outside `allowed`.
    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{} line {}: expected key=value, got {line:?}",
                    path.display(),
                    idx + 1
                ));
            };
            let key = key.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(format!(
                    "{} line {}: unknown key {key:?} (allowed: {})",
                    path.display(),
                    idx + 1,
                    allowed.join(", ")
                ));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key}={raw:?}: {e}")),
        }
    }
}

/// CLI flag beats file value beats default.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_and_last_key_wins() {
        let f = write_tmp("# comment\nm = 10\nrho=2.5\nm=20\n");
        let cfg = FileConfig::load(f.path(), &["m", "rho"]).unwrap();
        assert_eq!(cfg.get::<usize>("m").unwrap(), Some(20));
        assert_eq!(cfg.get::<f64>("rho").unwrap(), Some(2.5));
        assert_eq!(cfg.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let f = write_tmp("m=10\nbogus=1\n");
        let err = FileConfig::load(f.path(), &["m"]).unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn cli_overrides_file_overrides_default() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<i32>(None, None, 3), 3);
    }
}
