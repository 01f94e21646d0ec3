//! Key-value configuration files with command-line overrides.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Reads `path` (TOML `key = value` lines) if given, then applies
/// `key=value` overrides. Unknown keys are rejected by the target type.
pub fn load_config<T: DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", item)))?;
        let parsed: toml::Table = format!("v = {}", value.trim())
            .parse()
            .or_else(|_| format!("v = {:?}", value.trim()).parse())
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        insert_dotted(&mut table, key.trim(), parsed["v"].clone())?;
    }
    T::deserialize(table).map_err(|e| Error::Config(e.message().to_string()))
}

/// `a.b = v` sets key `b` of table `a`, creating it if needed.
fn insert_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
            Ok(())
        }
        Some((head, rest)) => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => insert_dotted(t, rest, value),
                _ => Err(Error::Config(format!("`{}` is not a table", head))),
            }
        }
    }
}

/// Renders a config as `key = value` lines, the same format it is read from.
pub fn render_config<T: serde::Serialize>(config: &T) -> String {
    toml::to_string(config).unwrap_or_default()
}
