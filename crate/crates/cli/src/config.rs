use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A precondition on the command line or in the config file failed.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Reads the flat JSON config (if any), lays the set flags over it and
/// deserializes the result. Keys the command does not know are rejected.
pub fn resolve<T, O>(file: Option<&Path>, overrides: &O) -> Result<T>
where
    T: Serialize + DeserializeOwned,
    O: Serialize,
{
    let mut merged = match file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))? {
                Value::Object(map) => map,
                _ => return Err(usage(format!("config {} must be a JSON object", path.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(flags) = serde_json::to_value(overrides)? {
        merged.extend(flags.into_iter().filter(|(_, v)| !v.is_null()));
    }
    let keys: Vec<String> = merged.keys().cloned().collect();
    let config: T = serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))?;
    let Value::Object(known) = serde_json::to_value(&config)? else {
        unreachable!("configs serialize to objects")
    };
    let unknown: Vec<&str> = keys
        .iter()
        .map(String::as_str)
        .filter(|k| !known.contains_key(*k))
        .collect();
    if !unknown.is_empty() {
        return Err(usage(format!("unknown config keys: {}", unknown.join(", "))));
    }
    Ok(config)
}
