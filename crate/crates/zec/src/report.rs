//! Deterministic report serialization and run manifests.
//!
//! All JSON emitted by the tool goes through [`to_canonical_json`]: keys
//! sorted, floats rounded to 10 significant digits, no trailing
//! whitespace. Two runs with identical manifests produce byte-identical
//! reports.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Round a float to 10 significant decimal digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.9e}").parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serialize with sorted keys and rounded floats; trailing newline included.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Invalid(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub flags: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            flags: BTreeMap::new(),
            channel_sha256: None,
            seed: None,
            timestamp: None,
        }
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> RunManifest {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_channel(mut self, channel_json: &str) -> RunManifest {
        self.channel_sha256 = Some(sha256_hex(channel_json));
        self
    }
}

/// Write atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Invalid(format!("cannot create temp file in {dir:?}: {e}")))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::Invalid(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| Error::Invalid(format!("rename to {path:?} failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rounding() {
        assert_eq!(round_sig(0.6942419136306174), 0.6942419136);
        assert_eq!(round_sig(1.0), 1.0);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(-1.2345678906999e-3), -0.001234567891);
    }

    #[test]
    fn canonical_json_sorted_and_stable() {
        #[derive(Serialize)]
        struct T {
            zeta: f64,
            alpha: u32,
        }
        let s = to_canonical_json(&T {
            zeta: 0.123456789012345,
            alpha: 3,
        })
        .unwrap();
        let a = s.find("alpha").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < z);
        assert!(s.contains("0.123456789"));
        assert!(!s.contains("0.123456789012345"));
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, "{}\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "{}\n");
        write_atomic(&path, "[1]\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "[1]\n");
    }
}
