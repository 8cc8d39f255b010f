//! Canonical JSON emission: sorted object keys and a fixed float format, so
//! equal values always serialize to identical bytes.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatFormat {
    /// Shortest representation that parses back to the same `f64`.
    RoundTrip,
    /// Scientific notation with the given number of significant digits.
    Significant(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct CanonicalStyle {
    pub floats: FloatFormat,
    pub pretty: bool,
}

impl CanonicalStyle {
    pub const COMPACT: Self = Self { floats: FloatFormat::RoundTrip, pretty: false };
    pub const PRETTY: Self = Self { floats: FloatFormat::RoundTrip, pretty: true };
}

pub fn to_canonical_string<T: Serialize>(
    value: &T,
    style: CanonicalStyle,
) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, style, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn format_float(x: f64, floats: FloatFormat) -> String {
    match floats {
        FloatFormat::RoundTrip => {
            let n = serde_json::Number::from_f64(x).expect("finite float");
            n.to_string()
        }
        FloatFormat::Significant(digits) => {
            let digits = digits.max(1);
            // -0.0 and 0.0 serialize identically
            let x = if x == 0.0 { 0.0 } else { x };
            format!("{:.*e}", digits - 1, x)
        }
    }
}

fn newline(style: CanonicalStyle, depth: usize, out: &mut String) {
    if style.pretty {
        out.push('\n');
        for _ in 0..depth {
            out.push_str("  ");
        }
    }
}

fn write_value(value: &Value, style: CanonicalStyle, depth: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (None, Some(i), _) => out.push_str(&i.to_string()),
            (None, None, Some(f)) => out.push_str(&format_float(f, style.floats)),
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escape")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // scalar arrays stay on one line even in pretty mode
            let flat = items.iter().all(|v| !v.is_array() && !v.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if !flat {
                    newline(style, depth + 1, out);
                }
                write_value(item, style, depth + 1, out);
            }
            if !flat {
                newline(style, depth, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(style, depth + 1, out);
                out.push_str(&serde_json::to_string(key).expect("key escape"));
                out.push(':');
                if style.pretty {
                    out.push(' ');
                }
                write_value(&map[key], style, depth + 1, out);
            }
            newline(style, depth, out);
            out.push('}');
        }
    }
}
