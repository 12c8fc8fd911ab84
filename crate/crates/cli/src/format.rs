//! Deterministic number formatting for reports.

use serde_json::{Number, Value};

/// Significant digits kept in reports.
pub const DIGITS: usize = 12;

pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let rounded: f64 = format!("{:.*e}", DIGITS - 1, v).parse().unwrap();
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Rounds every non-integer number in `value` to [`DIGITS`] significant digits.
pub fn round_value(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = round_sig(n.as_f64().unwrap());
            Number::from_f64(v).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// CSV cell for an optional number.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| number(round_sig(x))).unwrap_or_default()
}

fn number(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn flag(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}
