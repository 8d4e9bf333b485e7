//! Line-oriented config files: `[section]` headers, `key = value` lines,
//! `#` comments. Values stay strings until a typed getter parses them, so
//! one parser serves every subcommand.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// A parsed config file. Keys before the first section header live in the
/// unnamed section `""`.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = index + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let Some(name) = inner.strip_suffix(']') else {
                    return Err(CliError::Validation(format!(
                        "config line {lineno}: unterminated section header `{line}`"
                    )));
                };
                current = name.trim().to_string();
                if current.is_empty() {
                    return Err(CliError::Validation(format!(
                        "config line {lineno}: empty section name"
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "config line {lineno}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(CliError::Validation(format!(
                    "config line {lineno}: empty key"
                )));
            }
            let section = sections.entry(current.clone()).or_default();
            if section.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Validation(format!(
                    "config line {lineno}: duplicate key `{key}` in section `[{current}]`"
                )));
            }
        }
        Ok(Config { sections })
    }

    pub fn from_file(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            CliError::Runtime(format!("cannot read config {}: {err}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Raw string value, if present.
    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Parses the value with `FromStr`; absent keys give `None`.
    pub fn parsed<T>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|err| {
                CliError::Validation(format!(
                    "config [{section}] {key}: cannot parse `{raw}`: {err}"
                ))
            }),
        }
    }

    /// Like [`Config::parsed`] but with a default for absent keys.
    pub fn parsed_or<T>(&self, section: &str, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list value, trimmed; absent keys give `None`.
    pub fn list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.raw(section, key).map(|raw| {
            raw.split(',')
                .map(str::trim)
                .filter(|item| !item.is_empty())
                .map(str::to_string)
                .collect()
        })
    }

    /// Rejects any key outside the allowlist, so typos fail loudly instead
    /// of silently falling back to defaults.
    pub fn check_known(&self, allowed: &[(&str, &[&str])]) -> Result<(), CliError> {
        for (section, keys) in &self.sections {
            let Some((_, allowed_keys)) =
                allowed.iter().find(|(name, _)| name == section)
            else {
                return Err(CliError::Validation(format!(
                    "config: unknown section `[{section}]`"
                )));
            };
            for key in keys.keys() {
                if !allowed_keys.contains(&key.as_str()) {
                    return Err(CliError::Validation(format!(
                        "config: unknown key `{key}` in section `[{section}]`"
                    )));
                }
            }
        }
        Ok(())
    }
}
