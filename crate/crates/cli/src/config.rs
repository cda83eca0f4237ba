//! Layered configuration: built-in defaults, then a TOML file, then flags.
//! Layers are merged as JSON trees and the result is deserialized into the
//! command's config type, which rejects unknown keys.

use std::fmt;
use std::path::Path;

use anyhow::Result;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A mistake in flags or config that the user has to fix. Exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn read_config_file(path: Option<&Path>) -> Result<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    Ok(serde_json::to_value(table)?)
}

/// Deep merge: objects merge key by key, anything else is replaced.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Flag values keyed by dotted paths; unset flags are skipped.
#[derive(Debug, Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<T: Serialize>(&mut self, path: &str, value: Option<T>) -> &mut Self {
        let Some(v) = value else { return self };
        let v = serde_json::to_value(v).expect("flag values serialize");
        let mut keys = path.split('.').peekable();
        let mut node = &mut self.0;
        while let Some(k) = keys.next() {
            if keys.peek().is_none() {
                node.insert(k.to_string(), v);
                break;
            }
            node = node
                .entry(k)
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("override paths do not collide");
        }
        self
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.0)
    }
}

/// File values overlaid with flags, before defaults are known.
pub fn overlay(file: Option<&Path>, flags: Overrides) -> Result<Value> {
    let mut v = read_config_file(file)?;
    merge(&mut v, flags.into_value());
    Ok(v)
}

/// Looks up a dotted path in an overlay and deserializes it.
pub fn peek<T: DeserializeOwned>(overlay: &Value, path: &str) -> Result<Option<T>> {
    let mut node = overlay;
    for k in path.split('.') {
        match node.get(k) {
            Some(v) => node = v,
            None => return Ok(None),
        }
    }
    serde_json::from_value(node.clone())
        .map(Some)
        .map_err(|e| usage(format!("invalid value for {path}: {e}")))
}

pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, overlay: Value) -> Result<T> {
    let mut v = serde_json::to_value(defaults)?;
    merge(&mut v, overlay);
    serde_json::from_value(v).map_err(|e| usage(format!("invalid configuration: {e}")))
}
