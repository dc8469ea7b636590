//! Layered configuration: defaults, then a JSON or `key=value` file, then
//! individual `key=value` overrides. Dotted keys address nested tables.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Parses a value the way JSON would, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `key` (dotted) inside `root`, creating intermediate tables.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(Error::Config(format!("`{key}`: `{part}` is not a table")));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    match node.as_object_mut() {
        Some(table) => {
            table.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(format!("`{key}` does not address a table entry"))),
    }
}

/// Splits `key=value`.
pub fn parse_assignment(line: &str) -> Result<(&str, Value)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got `{line}`")))?;
    Ok((k.trim(), parse_value(v)))
}

/// Reads assignments from `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, Value)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_assignment(l).map(|(k, v)| (k.to_string(), v)))
        .collect()
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
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

/// Builds a `T` from its defaults, an optional file (`.json` or `key=value`
/// lines) and `key=value` overrides. Unknown keys are rejected by `T`.
pub fn load_layered<T>(file: Option<&Path>, overrides: &[String]) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = file {
        let text = fs::read_to_string(path)?;
        match serde_json::from_str::<Value>(&text) {
            Ok(json) if json.is_object() => merge(&mut value, json),
            _ => {
                for (k, v) in parse_key_values(&text)? {
                    set_path(&mut value, &k, v)?;
                }
            }
        }
    }
    for o in overrides {
        let (k, v) = parse_assignment(o)?;
        set_path(&mut value, k, v)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Inner {
        k: usize,
        name: String,
    }

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Outer {
        rate: f64,
        inner: Inner,
        range: [f64; 2],
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let over = [
            "rate=0.5".to_string(),
            "inner.k=7".into(),
            "inner.name=abc".into(),
            "range=[1,2]".into(),
        ];
        let cfg: Outer = load_layered(None, &over).unwrap();
        assert_eq!(
            cfg,
            Outer {
                rate: 0.5,
                inner: Inner {
                    k: 7,
                    name: "abc".into()
                },
                range: [1.0, 2.0],
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load_layered::<Outer>(None, &["nope=1".into()]).is_err());
        assert!(load_layered::<Outer>(None, &["inner.nope=1".into()]).is_err());
        assert!(load_layered::<Outer>(None, &["rate".into()]).is_err());
    }

    #[test]
    fn key_value_file_and_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let kv = dir.path().join("a.cfg");
        fs::write(&kv, "# comment\nrate = 2\n\ninner.k = 3\n").unwrap();
        let cfg: Outer = load_layered(Some(&kv), &["inner.k=4".into()]).unwrap();
        assert_eq!((cfg.rate, cfg.inner.k), (2.0, 4));
        let js = dir.path().join("b.json");
        fs::write(&js, r#"{"inner": {"name": "x"}}"#).unwrap();
        let cfg: Outer = load_layered(Some(&js), &[]).unwrap();
        assert_eq!(cfg.inner.name, "x");
    }
}
