//! Deterministic JSON emission.
//!
//! Stage outputs double as regression baselines, so two properties matter
//! more than speed: object keys keep their insertion order (byte-identical
//! reruns) and every float is written with 17 significant digits, which is
//! enough for a lossless f64 round-trip. Parsing of external JSON inputs
//! is delegated to `serde_json`; this module only writes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{validation, Result};

/// JSON value with insertion-ordered object keys.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    /// Object from key-value pairs, keeping the given order.
    pub fn obj(pairs: Vec<(&str, Json)>) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn floats(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::Num(v)).collect())
    }

    /// Array of `[x, y]` pairs, the layout used for sampled profiles.
    pub fn pairs(values: &[(f64, f64)]) -> Json {
        Json::Arr(
            values
                .iter()
                .map(|&(x, y)| Json::Arr(vec![Json::Num(x), Json::Num(y)]))
                .collect(),
        )
    }
}

fn escape_into(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_into(out: &mut String, v: &Json, indent: usize) -> Result<()> {
    let pad = "  ".repeat(indent);
    let pad_in = "  ".repeat(indent + 1);
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Json::Num(x) => {
            if !x.is_finite() {
                return validation(format!("refusing to emit non-finite number {x}"));
            }
            let _ = write!(out, "{x:.16e}");
        }
        Json::Str(s) => escape_into(out, s),
        Json::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            // Flat arrays of scalars stay on one line; nested ones wrap.
            let scalar = items
                .iter()
                .all(|i| !matches!(i, Json::Arr(_) | Json::Obj(_)));
            if scalar {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    render_into(out, item, indent)?;
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad_in);
                    render_into(out, item, indent + 1)?;
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push(']');
            }
        }
        Json::Obj(pairs) => {
            if pairs.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push_str("{\n");
            for (k, (key, item)) in pairs.iter().enumerate() {
                out.push_str(&pad_in);
                escape_into(out, key);
                out.push_str(": ");
                render_into(out, item, indent + 1)?;
                if k + 1 < pairs.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad);
            out.push('}');
        }
    }
    Ok(())
}

/// Serialize with two-space indentation and a trailing newline.
pub fn render(v: &Json) -> Result<String> {
    let mut out = String::new();
    render_into(&mut out, v, 0)?;
    out.push('\n');
    Ok(out)
}

/// Render and write atomically enough for our purposes (single write).
pub fn write_json(path: &Path, v: &Json) -> Result<()> {
    std::fs::write(path, render(v)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in &[
            std::f64::consts::PI,
            1.0 / 3.0,
            6.626e-34,
            -0.0,
            1e300,
            5e-324,
        ] {
            let s = render(&Json::Num(x)).unwrap();
            let back: f64 = s.trim().parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn rendering_is_deterministic_and_ordered() {
        let v = Json::obj(vec![
            ("zeta", Json::Num(1.5)),
            ("alpha", Json::Arr(vec![Json::Int(1), Json::Int(2)])),
            ("name", Json::Str("desk \"case\"".into())),
        ]);
        let a = render(&v).unwrap();
        let b = render(&v).unwrap();
        assert_eq!(a, b);
        // Insertion order survives; no alphabetical reshuffle.
        assert!(a.find("zeta").unwrap() < a.find("alpha").unwrap());
        assert!(a.contains("\\\"case\\\""));
    }

    #[test]
    fn non_finite_is_refused() {
        assert!(render(&Json::Num(f64::NAN)).is_err());
        assert!(render(&Json::Num(f64::INFINITY)).is_err());
    }

    #[test]
    fn parses_as_json() {
        let v = Json::obj(vec![
            ("profile", Json::pairs(&[(0.1, 1.0), (0.2, 0.5)])),
            ("ok", Json::Bool(true)),
            ("none", Json::Null),
        ]);
        let s = render(&v).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["profile"][1][1], 0.5);
        assert_eq!(parsed["ok"], true);
    }
}
