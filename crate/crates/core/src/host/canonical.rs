//! Canonical argument serialization and content-hash cache keys.
//!
//! Canonical form: map keys sorted lexicographically at every level, no
//! insignificant whitespace, numbers in shortest round-trip decimal form.
//! The cache key is the lowercase hex SHA-256 of
//! `tool_name ++ ":" ++ canonical(arguments)`.

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KeyError {
    #[error("non-canonicalizable value: {0}")]
    NonCanonical(String),
}

/// Canonical serialization of a JSON value.
pub fn canonical_json(value: &Value) -> Result<String, KeyError> {
    let mut out = String::new();
    write_canonical(value, &mut out)?;
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut String) -> Result<(), KeyError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !f.is_finite() {
                    return Err(KeyError::NonCanonical(format!("non-finite number {f}")));
                }
            }
            // serde_json renders integers plainly and floats via ryu, which
            // is the shortest round-trip decimal form.
            out.push_str(&n.to_string());
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"))
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serialization"));
                out.push(':');
                write_canonical(&map[*key], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// Content-hash cache key over the tool name and its arguments.
pub fn cache_key(
    tool_name: &str,
    arguments: &serde_json::Map<String, Value>,
) -> Result<String, KeyError> {
    let canonical = canonical_json(&Value::Object(arguments.clone()))?;
    let mut hasher = Sha256::new();
    hasher.update(tool_name.as_bytes());
    hasher.update(b":");
    hasher.update(canonical.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

/// Checked conversion for handler-computed floats; rejects non-finite values
/// that JSON cannot carry.
pub fn json_number(value: f64) -> Result<Value, KeyError> {
    serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| KeyError::NonCanonical(format!("non-finite number {value}")))
}
