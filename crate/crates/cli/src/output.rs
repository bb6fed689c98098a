//! Deterministic JSON text: every float is cut to 12 significant digits.

use serde_json::{Number, Value};

const SIGNIFICANT: usize = 12;

pub fn round_to(x: f64, step: f64) -> f64 {
    let r = (x / step).round() * step;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT - 1, x).parse().unwrap_or(x)
}

fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().map(significant).and_then(Number::from_f64) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize),
        Value::Object(map) => map.values_mut().for_each(normalize),
        _ => {}
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut v = v.clone();
    normalize(&mut v);
    serde_json::to_string_pretty(&v).expect("a Value always serializes")
}
