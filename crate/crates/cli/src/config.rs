//! Optional `key = value` config file. Keys are the long flag names without
//! the leading dashes; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

/// Keys a config file may set.
pub const KEYS: &[&str] = &[
    "scheme",
    "distance",
    "distances",
    "p-bond",
    "p-comp",
    "p-comp-range",
    "trials",
    "seed",
    "workers",
    "format",
    "backend",
    "bootstrap",
    "time-budget",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", no + 1))?;
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key `{k}`", no + 1));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| v.parse::<T>().map_err(|e| format!("config key `{key}`: {e}"))).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let c = Config::parse("# sweep\ntrials = 500\np_comp = 0.01, 0.02  # two points\n\nscheme=adaptive").unwrap();
        assert_eq!(c.get::<u64>("trials").unwrap(), Some(500));
        assert_eq!(c.raw("p-comp"), Some("0.01, 0.02"));
        assert_eq!(c.raw("scheme"), Some("adaptive"));
        assert_eq!(c.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(Config::parse("colour = red").is_err());
        assert!(Config::parse("trials").is_err());
        assert!(Config::parse("trials = many").unwrap().get::<u64>("trials").is_err());
    }
}
