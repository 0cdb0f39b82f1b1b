//! Run configuration: `key = value` files overlaid by command-line flags.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key a configuration file may set.
pub const KEYS: &[&str] = &[
    "curves",
    "responses",
    "query",
    "l",
    "kernel",
    "seminorm",
    "C",
    "nu",
    "cv",
    "grid_C",
    "grid_nu",
    "alpha",
    "seed",
    "snapshot",
    "out",
    "n",
    "p",
    "noise",
    "design",
    "reps",
    "study",
    "ns",
    "ells",
    "n0",
    "N",
    "checkpoints",
    "repeats",
    "kappa",
    "delta",
    "r",
];

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", k + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", k + 1)));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(RunConfig {
            values,
            ..RunConfig::default()
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::parse(&text)
            }
        }
    }

    /// Flags given on the command line win over file values.
    pub fn overlay(&mut self, flags: Vec<(&'static str, Option<String>)>) {
        for (key, value) in flags {
            debug_assert!(KEYS.contains(&key), "flag {key} missing from KEYS");
            if let Some(v) = value {
                self.values.insert(key.to_string(), v);
            }
        }
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v.clone());
        }
        v
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| parse_number::<T>(v.trim()).map_err(|e| CliError::Usage(format!("{key}: cannot parse {e}"))))
            .transpose()
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        match self.opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting --{key}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key).as_deref() {
            None => {
                self.record(key, "false".into());
                Ok(false)
            }
            Some("true") | Some("1") | Some("yes") | Some("") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(CliError::Usage(format!("{key}: expected true or false, got {other:?}"))),
        }
    }

    /// A comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key).unwrap_or_else(|| {
            self.record(key, default.to_string());
            default.to_string()
        });
        raw.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_number(s.trim()).map_err(|e| CliError::Usage(format!("{key}: {e}"))))
            .collect()
    }

    /// The settings consulted so far, defaults included.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    pub fn header(&self, command: &str) -> String {
        let pairs: Vec<String> = self.resolved().iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# funflow {command} {}", pairs.join(" "))
    }
}

/// Parses a number, accepting fractions such as `1/3`.
fn parse_number<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    if let Some((a, b)) = s.split_once('/') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            return (a / b).to_string().parse().map_err(|e: T::Err| format!("{s:?}: {e}"));
        }
    }
    s.parse().map_err(|e: T::Err| format!("{s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_overrides() {
        let mut c = RunConfig::parse("# settings\nkernel = uniform\nC=2 # trailing\n\nnu=0.25\n").unwrap();
        c.overlay(vec![("C", Some("0.5".into())), ("nu", None)]);
        assert_eq!(c.get::<f64>("C", 1.0).unwrap(), 0.5);
        assert_eq!(c.get::<f64>("nu", 0.1).unwrap(), 0.25);
        assert_eq!(c.raw("kernel").as_deref(), Some("uniform"));
        assert_eq!(c.get::<u64>("seed", 1).unwrap(), 1);
        assert_eq!(c.resolved().get("seed").map(String::as_str), Some("1"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("bandwidth=3").is_err());
        assert!(RunConfig::parse("just words").is_err());
    }

    #[test]
    fn lists_accept_fractions() {
        let c = RunConfig::parse("grid_nu = 1/10, 1/2, 1").unwrap();
        assert_eq!(c.list::<f64>("grid_nu", "").unwrap(), vec![0.1, 0.5, 1.0]);
        assert_eq!(c.list::<usize>("ns", "100,200").unwrap(), vec![100, 200]);
    }
}
