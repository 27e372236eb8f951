//! Language-neutral canonical values.
//!
//! Probe output from every subject language is normalized into this one
//! value model so that runtime states can be compared across languages:
//! lists/arrays/deques/tuples become arrays, maps become objects with
//! stringified keys, all integer types become exact arbitrary-precision
//! integers (overflow evidence must survive round-trips), and sets are
//! emitted pre-sorted by their canonical serialization.
//!
//! The *canonical serialization* is JSON with object keys sorted and no
//! insignificant whitespace, as produced by [`CanonicalValue::to_canonical_string`].
//! The probe emitters approximate this format; round-tripping through
//! `parse` + `to_canonical_string` is the normalizing fixed point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalValue {
    Null,
    Bool(bool),
    /// Exact integer of arbitrary precision: no silent float conversion.
    Int(BigInt),
    /// Finite binary64 float. Non-finite values are represented upstream
    /// as `{"__repr__": ...}` objects because JSON cannot carry them.
    Float(f64),
    Str(String),
    Array(Vec<CanonicalValue>),
    Object(BTreeMap<String, CanonicalValue>),
}

impl CanonicalValue {
    pub fn int(v: impl Into<BigInt>) -> Self {
        CanonicalValue::Int(v.into())
    }

    pub fn str(v: impl Into<String>) -> Self {
        CanonicalValue::Str(v.into())
    }

    /// Finite floats map to `Float`; NaN/inf fall back to a repr object,
    /// mirroring what the probe emitters do.
    pub fn float(v: f64) -> Self {
        if v.is_finite() {
            CanonicalValue::Float(v)
        } else {
            let mut m = BTreeMap::new();
            m.insert("__repr__".to_string(), CanonicalValue::Str(format!("{v}")));
            CanonicalValue::Object(m)
        }
    }

    /// Parse a JSON document into a canonical value. Integer literals of
    /// any magnitude are preserved exactly.
    pub fn parse(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        Ok(Self::from_json(&v))
    }

    pub fn from_json(v: &serde_json::Value) -> Self {
        match v {
            serde_json::Value::Null => CanonicalValue::Null,
            serde_json::Value::Bool(b) => CanonicalValue::Bool(*b),
            serde_json::Value::Number(n) => Self::from_number(n),
            serde_json::Value::String(s) => CanonicalValue::Str(s.clone()),
            serde_json::Value::Array(items) => {
                CanonicalValue::Array(items.iter().map(Self::from_json).collect())
            }
            serde_json::Value::Object(map) => CanonicalValue::Object(
                map.iter()
                    .map(|(k, v)| (k.clone(), Self::from_json(v)))
                    .collect(),
            ),
        }
    }

    fn from_number(n: &serde_json::Number) -> Self {
        // With the arbitrary_precision feature, `to_string` returns the
        // raw literal, so huge integers survive exactly.
        let raw = n.to_string();
        if raw.contains(['.', 'e', 'E']) {
            match raw.parse::<f64>() {
                Ok(f) => CanonicalValue::float(f),
                Err(_) => CanonicalValue::Str(raw),
            }
        } else {
            match BigInt::from_str(&raw) {
                Ok(i) => CanonicalValue::Int(i),
                Err(_) => CanonicalValue::Str(raw),
            }
        }
    }

    /// Canonical serialization: sorted object keys, no whitespace, shortest
    /// round-trip float formatting.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            CanonicalValue::Null => out.push_str("null"),
            CanonicalValue::Bool(true) => out.push_str("true"),
            CanonicalValue::Bool(false) => out.push_str("false"),
            CanonicalValue::Int(i) => out.push_str(&i.to_string()),
            CanonicalValue::Float(f) => match serde_json::Number::from_f64(*f) {
                Some(n) => out.push_str(&n.to_string()),
                None => out.push_str("{\"__repr__\":\"non-finite\"}"),
            },
            CanonicalValue::Str(s) => {
                out.push_str(&serde_json::to_string(s).expect("string serialization"))
            }
            CanonicalValue::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_canonical(out);
                }
                out.push(']');
            }
            CanonicalValue::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&serde_json::to_string(k).expect("key serialization"));
                    out.push(':');
                    v.write_canonical(out);
                }
                out.push('}');
            }
        }
    }

    /// Kind name for diagnostics.
    pub fn kind_name(&self) -> &'static str {
        match self {
            CanonicalValue::Null => "null",
            CanonicalValue::Bool(_) => "bool",
            CanonicalValue::Int(_) => "int",
            CanonicalValue::Float(_) => "float",
            CanonicalValue::Str(_) => "string",
            CanonicalValue::Array(_) => "array",
            CanonicalValue::Object(_) => "object",
        }
    }
}

impl fmt::Display for CanonicalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

impl Serialize for CanonicalValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CanonicalValue::Null => serializer.serialize_unit(),
            CanonicalValue::Bool(b) => serializer.serialize_bool(*b),
            CanonicalValue::Int(i) => {
                let n = serde_json::Number::from_str(&i.to_string())
                    .map_err(|e| serde::ser::Error::custom(e.to_string()))?;
                n.serialize(serializer)
            }
            CanonicalValue::Float(f) => serializer.serialize_f64(*f),
            CanonicalValue::Str(s) => serializer.serialize_str(s),
            CanonicalValue::Array(items) => items.serialize(serializer),
            CanonicalValue::Object(map) => map.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for CanonicalValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(deserializer)?;
        Ok(CanonicalValue::from_json(&v))
    }
}

/// Normalize any JSON text to its canonical serialization.
pub fn canonicalize_json_text(text: &str) -> Result<String> {
    Ok(CanonicalValue::parse(text)?.to_canonical_string())
}

/// Compare two program outputs: when both parse as JSON they are compared
/// as canonical values with float tolerance, otherwise as exact text
/// (surrounding whitespace trimmed).
pub fn outputs_match(expected: &str, actual: &str, tol: super::FloatTolerance) -> bool {
    match (
        CanonicalValue::parse(expected.trim()),
        CanonicalValue::parse(actual.trim()),
    ) {
        (Ok(a), Ok(b)) => super::compare::tolerant_equal(&a, &b, tol),
        _ => expected.trim() == actual.trim(),
    }
}

impl From<i64> for CanonicalValue {
    fn from(v: i64) -> Self {
        CanonicalValue::Int(BigInt::from(v))
    }
}

impl From<&str> for CanonicalValue {
    fn from(v: &str) -> Self {
        CanonicalValue::Str(v.to_string())
    }
}

impl From<bool> for CanonicalValue {
    fn from(v: bool) -> Self {
        CanonicalValue::Bool(v)
    }
}
