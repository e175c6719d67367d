//! On-disk formats: environment files, value/Q/policy tables, episode
//! traces and CSV series. Every writer is deterministic, so hashes of the
//! written bytes identify their content.

mod csv_io;
mod env_file;
mod table_file;
mod trace;

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::SmdpError;

pub use csv_io::{
    read_errors_csv, read_metrics_csv, read_rewards_csv, write_errors_csv, write_metrics_csv, write_rewards_csv,
};
pub use env_file::{env_hash, read_env, write_env, EnvFile};
pub use table_file::{
    policy_hash, read_policy, read_q_table, read_value_table, write_policy, write_q_table, write_value_table,
    Provenance, TableKind,
};
pub use trace::{read_trace, write_trace, TraceHeader};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Model(#[from] SmdpError),
}

impl FormatError {
    pub(crate) fn parse(location: impl Into<String>, message: impl fmt::Display) -> Self {
        FormatError::Parse { location: location.into(), message: message.to_string() }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Deserializes JSON text, locating errors by field path and line.
pub(crate) fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> FormatResult<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let location = if path == "." {
            format!("line {} column {}", inner.line(), inner.column())
        } else {
            format!("{path} (line {} column {})", inner.line(), inner.column())
        };
        FormatError::parse(location, inner)
    })?;
    de.end().map_err(|e| FormatError::parse(format!("line {} column {}", e.line(), e.column()), e))?;
    Ok(value)
}

/// Deserializes an already-parsed JSON subtree found at `prefix`.
pub(crate) fn from_value<T: for<'de> Deserialize<'de>>(value: serde_json::Value, prefix: &str) -> FormatResult<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let location = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        FormatError::parse(location, e.into_inner())
    })
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A real number written as a JSON number and read from either a number or
/// a decimal string. Strings are parsed with correct rounding, numbers with
/// serde_json's round-trip float parser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a decimal string")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                v.trim().parse::<f64>().map(Num).map_err(|_| E::custom(format!("`{v}` is not a decimal number")))
            }
        }
        deserializer.deserialize_any(NumVisitor)
    }
}

pub(crate) fn nums(values: &[f64]) -> Vec<Num> {
    values.iter().copied().map(Num).collect()
}

pub(crate) fn floats(values: &[Num]) -> Vec<f64> {
    values.iter().map(|n| n.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_strings() {
        let v: Vec<Num> = serde_json::from_str(r#"[0.1, "0.1", 3, "-2.5e-3", " 0.7 "]"#).unwrap();
        assert_eq!(floats(&v), vec![0.1, 0.1, 3.0, -2.5e-3, 0.7]);
        assert!(serde_json::from_str::<Num>(r#""abc""#).is_err());
        assert!(serde_json::from_str::<Num>("true").is_err());
    }

    #[test]
    fn floats_round_trip_exactly() {
        let xs = [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 0.2 + 0.1, f64::MIN_POSITIVE, 123456789.12345679];
        let text = serde_json::to_string(&nums(&xs)).unwrap();
        let back: Vec<Num> = serde_json::from_str(&text).unwrap();
        assert_eq!(floats(&back).iter().map(|v| v.to_bits()).collect::<Vec<_>>(), xs.map(f64::to_bits).to_vec());
    }

    #[test]
    fn parse_errors_carry_a_location() {
        #[derive(Debug, Deserialize)]
        #[allow(dead_code)]
        struct Outer {
            inner: Vec<Num>,
        }
        let err = from_json::<Outer>("{\n \"inner\": [1, \"x\"]\n}").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("inner[1]") && text.contains("line 2"), "{text}");
    }
}
