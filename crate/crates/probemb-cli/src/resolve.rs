//! Flag resolution: explicit flags override `--config` JSON entries, which
//! override built-in defaults. Unknown config keys are errors, mirroring the
//! treatment of unknown flags.

use serde_json::Value;
use std::collections::BTreeMap;

use crate::CliError;

pub struct ConfigMap {
    values: BTreeMap<String, Value>,
}

impl ConfigMap {
    /// Load the `--config` JSON object, if any, validating its keys against
    /// the command's flag names.
    pub fn load(path: Option<&str>, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read config {path:?}: {e}"))
            })?;
            let parsed: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{path}: invalid JSON: {e}")))?;
            let object = parsed.as_object().ok_or_else(|| {
                CliError::Validation(format!("{path}: config must be a JSON object"))
            })?;
            for (key, value) in object {
                if !allowed.contains(&key.as_str()) {
                    return Err(CliError::Validation(format!(
                        "{path}: unknown config key {key:?}"
                    )));
                }
                values.insert(key.clone(), value.clone());
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn usize_value(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| bad_type(key, "a nonnegative integer")),
        }
    }

    pub fn u64_value(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| bad_type(key, "a nonnegative integer")),
        }
    }

    pub fn f64_value(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| bad_type(key, "a number")),
        }
    }

    pub fn string_value(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| bad_type(key, "a string")),
        }
    }
}

fn bad_type(key: &str, expected: &str) -> CliError {
    CliError::Validation(format!("config key {key:?} must be {expected}"))
}

/// flag > config > default; errors when no source provides a value.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(config).or(default).ok_or_else(|| {
        CliError::Validation(format!("missing required flag --{name}"))
    })
}

/// Parse a comma-separated list with a per-item parser.
pub fn parse_list<T>(
    text: &str,
    name: &str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let trimmed = part.trim();
        match parse(trimmed) {
            Some(v) => out.push(v),
            None => {
                return Err(CliError::Validation(format!(
                    "--{name}: cannot parse list entry {trimmed:?}"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("--{name}: empty list")));
    }
    Ok(out)
}
