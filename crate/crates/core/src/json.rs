//! Deterministic JSON rendering: sorted keys, two-space indentation,
//! numbers with 17 significant digits in the shortest `%g`-style form.

use serde::Serialize;
use serde_json::Value;

/// Formats like C's `%.17g`, which round-trips every finite `f64`.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if !(-4..17).contains(&exp) {
        let (lead, frac) = digits.split_at(1);
        let frac = frac.trim_end_matches('0');
        let body = if frac.is_empty() { lead.to_string() } else { format!("{lead}.{frac}") };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{body}e{esign}{:02}", exp.abs());
    }
    let body = if exp >= 0 {
        let point = exp as usize + 1;
        let (int, frac) = digits.split_at(point);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{}", digits.trim_end_matches('0'))
    };
    format!("{sign}{body}")
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&format_number(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(is_scalar) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    pad(out, indent + 1);
                    write_value(out, item, indent + 1);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (k, key) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&serde_json::to_string(key).expect("key encodes"));
                out.push_str(": ");
                write_value(out, &map[key.as_str()], indent + 1);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

pub fn to_canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// Serializes any report through [`to_canonical_string`].
pub fn render<S: Serialize>(value: &S) -> Result<String, serde_json::Error> {
    Ok(to_canonical_string(&serde_json::to_value(value)?))
}

/// One `path = value` line per scalar or scalar array, in canonical key order.
pub fn to_text(v: &Value) -> String {
    let mut out = String::new();
    write_text(&mut out, v, "");
    out
}

fn write_text(out: &mut String, v: &Value, path: &str) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for k in keys {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                write_text(out, &map[k], &p);
            }
        }
        Value::Array(items) if !items.iter().all(is_scalar) => {
            for (i, item) in items.iter().enumerate() {
                write_text(out, item, &format!("{path}[{i}]"));
            }
        }
        _ => {
            let mut rendered = String::new();
            write_value(&mut rendered, v, 0);
            out.push_str(&format!("{path} = {rendered}\n"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g17() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (0.1, "0.10000000000000001"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (0.0001, "0.0001"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (1.5e300, "1.5000000000000001e+300"),
            (1.0 / 3.0, "0.33333333333333331"),
            (2f64.powi(-40), "9.0949470177292824e-13"),
        ];
        for (x, want) in cases {
            assert_eq!(format_number(x), want, "{x}");
        }
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-300, 6.02214076e23, -7.25e-9, f64::MAX, f64::MIN_POSITIVE] {
            let back: f64 = format_number(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn keys_are_sorted_and_output_is_stable() {
        let v: Value = serde_json::from_str(r#"{"b": [1, 2.5], "a": {"y": null, "x": [[1, 0.5], [2, 1]]}}"#).unwrap();
        let s = to_canonical_string(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert_eq!(s, to_canonical_string(&serde_json::from_str(&s).unwrap()));
    }

    #[test]
    fn text_lists_paths() {
        let v: Value = serde_json::from_str(r#"{"b": [1, 2.5], "a": {"y": null, "r": [{"k": 1}, {"k": 2}]}}"#).unwrap();
        assert_eq!(to_text(&v), "a.r[0].k = 1\na.r[1].k = 2\na.y = null\nb = [1, 2.5]\n");
    }
}
