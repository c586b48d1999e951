//! Artifact writing. Every float in JSON is rounded to 15 significant digits (and `-0`
//! printed as `0`), so artifacts are stable across runs that agree to that precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Output directory from the environment variable, else `heun-out`.
pub const OUT_DIR_ENV: &str = "HEUN_OUT_DIR";

pub fn round15(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.14e}").parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let r = round15(n.as_f64().expect("f64 number"));
                if let Some(m) = serde_json::Number::from_f64(r) {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes (non-finite floats become `null`), then rounds.
pub fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    let mut v = serde_json::to_value(x).map_err(|e| Error::Io(e.to_string()))?;
    round_value(&mut v);
    Ok(v)
}

pub fn json_string<T: Serialize>(x: &T) -> Result<String> {
    let v = to_value(x)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, x: &T) -> Result<PathBuf> {
    write_text(path, &json_string(x)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round15(0.1 + 0.2), 0.3);
        assert_eq!(round15(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(round15(1.234_567_890_123_456_7e-5), 1.234_567_890_123_46e-5);
        let s = json_string(&serde_json::json!({"a": [0.1 + 0.2, 1], "b": -0.0})).unwrap();
        assert!(s.contains("0.3") && !s.contains("-0"));
    }
}
