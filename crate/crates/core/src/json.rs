//! JSON emission with every number written to 17 significant digits.

use serde::Serializer;
use serde_json::value::RawValue;

use crate::numeric::fmt17;

fn raw(x: f64) -> Box<RawValue> {
    // Non-finite values have no JSON representation.
    let text = if x.is_finite() { fmt17(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

pub fn f17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_some(&raw(*x))
}

pub fn opt_f17<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&raw(*v)),
        None => s.serialize_none(),
    }
}

/// Serializes a value with serde_json, pretty printed.
pub fn to_string<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types always serialize")
}
