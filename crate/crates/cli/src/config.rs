use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Flat `key = value` parameters: config file first, then flag overrides.
/// Every value read through a getter is recorded so the run can echo its
/// resolved configuration.
#[derive(Debug, Default)]
pub struct Params {
    command: String,
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", no + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Params {
    pub fn new(
        command: &str,
        known: &[&str],
        config: Option<&Path>,
        overrides: Vec<(&str, String)>,
    ) -> Result<Self, CliError> {
        let mut values = match config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            values.insert(k.to_string(), v);
        }
        if let Some(bad) = values.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown key `{bad}` for `{command}`")));
        }
        Ok(Self { command: command.to_string(), values, resolved: RefCell::default() })
    }

    fn parse<T: FromStr>(&self, key: &str, raw: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        raw.parse().map_err(|e| CliError::Usage(format!("bad value `{raw}` for `{key}`: {e}")))
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = match self.values.get(key) {
            Some(raw) => self.parse(key, raw)?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn opt<T: FromStr + Display>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => {
                let v: T = self.parse(key, raw)?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn require<T: FromStr + Display>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?.ok_or_else(|| CliError::Usage(format!("`{}` needs `{key}`", self.command)))
    }

    /// A path that must already exist.
    pub fn input(&self, key: &str) -> Result<PathBuf, CliError> {
        let p: String = self.require(key)?;
        let path = PathBuf::from(&p);
        if !path.exists() {
            return Err(CliError::Usage(format!("{key} `{p}` does not exist")));
        }
        Ok(path)
    }

    /// Comma-separated list, or `start:stop:step` for numbers.
    pub fn list<T: FromStr + Display>(&self, key: &str, default: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.values.get(key).map(String::as_str).unwrap_or(default).to_string();
        let items: Vec<String> = match raw.split(':').collect::<Vec<_>>()[..] {
            [a, b, s] => {
                let (a, b, s): (f64, f64, f64) = (self.parse(key, a)?, self.parse(key, b)?, self.parse(key, s)?);
                if !(s > 0.0) || b < a {
                    return Err(CliError::Usage(format!("bad range `{raw}` for `{key}`")));
                }
                let count = ((b - a) / s + 1e-9).floor() as usize;
                (0..=count).map(|i| format!("{}", ((a + i as f64 * s) * 1e12).round() / 1e12)).collect()
            }
            _ => raw.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        };
        let out = items.iter().map(|s| self.parse(key, s)).collect::<Result<Vec<T>, _>>()?;
        if out.is_empty() {
            return Err(CliError::Usage(format!("`{key}` is empty")));
        }
        self.record(key, out.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        Ok(out)
    }

    /// The resolved configuration as a config file that reproduces the run.
    pub fn manifest(&self) -> String {
        let mut out = format!("# lrpca {} --config <this file>\n", self.command);
        for (k, v) in self.resolved.borrow().iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let m = parse_config("# top\nn-1 = 5  # trailing\n\nalpha=0.1\n").unwrap();
        assert_eq!(m["n_1"], "5");
        assert_eq!(m["alpha"], "0.1");
        assert!(matches!(parse_config("nonsense"), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_config_and_manifest_echoes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        fs::write(&cfg, "r = 3\nalpha = 0.2\n").unwrap();
        let p = Params::new("gen", &["r", "alpha", "n1"], Some(&cfg), vec![("alpha", "0.3".into())]).unwrap();
        assert_eq!(p.get::<usize>("r", 5).unwrap(), 3);
        assert_eq!(p.get::<f64>("alpha", 0.1).unwrap(), 0.3);
        assert_eq!(p.get::<usize>("n1", 100).unwrap(), 100);
        assert_eq!(p.manifest(), "# lrpca gen --config <this file>\nalpha = 0.3\nn1 = 100\nr = 3\n");
    }

    #[test]
    fn unknown_keys_and_ranges() {
        assert!(matches!(Params::new("gen", &["r"], None, vec![("q", "1".into())]), Err(CliError::Usage(_))));
        let p = Params::new("bench", &["alphas"], None, vec![("alphas", "0.4:0.7:0.05".into())]).unwrap();
        assert_eq!(p.list::<f64>("alphas", "").unwrap(), vec![0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7]);
    }
}
