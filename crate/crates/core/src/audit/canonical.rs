//! Canonical JSON: sorted keys, no whitespace, fixed-point reals.
//!
//! Reals are printed with at most 12 fractional digits, trailing zeros and
//! a bare trailing dot removed, and never in exponent form. Integers print
//! as integers. The output never contains a raw newline.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CanonicalizationError;

/// Version tag stored in every event so the form can evolve.
pub const CANONICAL_VERSION: &str = "1";

pub fn format_real(x: f64) -> Result<String, CanonicalizationError> {
    if !x.is_finite() {
        return Err(CanonicalizationError::NonFinite(x.to_string()));
    }
    let mut s = format!("{x:.12}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    Ok(s)
}

fn write_value(value: &Value, out: &mut String) -> Result<(), CanonicalizationError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| CanonicalizationError::NonFinite(n.to_string()))?;
                out.push_str(&format_real(f)?);
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).map_err(|e| CanonicalizationError::Serialize(e.to_string()))?)
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).map_err(|e| CanonicalizationError::Serialize(e.to_string()))?);
                out.push(':');
                write_value(v, out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

pub fn canonicalize_value(value: &Value) -> Result<Vec<u8>, CanonicalizationError> {
    let mut out = String::new();
    write_value(value, &mut out)?;
    Ok(out.into_bytes())
}

/// Canonical bytes of any serializable value. Callers holding floats must
/// reject non-finite values first: the JSON data model maps them to null.
pub fn canonicalize<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalizationError> {
    let value = serde_json::to_value(value).map_err(|e| CanonicalizationError::Serialize(e.to_string()))?;
    canonicalize_value(&value)
}

/// Parses canonical (or any JSON) bytes and re-emits them canonically.
pub fn recanonicalize(bytes: &[u8]) -> Result<Vec<u8>, CanonicalizationError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| CanonicalizationError::Parse(e.to_string()))?;
    canonicalize_value(&value)
}

/// Lowercase hex SHA-256 of the exact bytes.
pub fn compute_txid(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_valid_txid(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn canon(v: Value) -> String {
        String::from_utf8(canonicalize_value(&v).unwrap()).unwrap()
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.5).unwrap(), "0.5");
        assert_eq!(format_real(1.0).unwrap(), "1");
        assert_eq!(format_real(-0.0).unwrap(), "0");
        assert_eq!(format_real(-1e-14).unwrap(), "0");
        assert_eq!(format_real(1e-7).unwrap(), "0.0000001");
        assert_eq!(format_real(0.9164147094658042).unwrap(), "0.916414709466");
        assert_eq!(format_real(1e21).unwrap(), "1000000000000000000000");
        assert!(format_real(f64::NAN).is_err());
        assert!(format_real(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn sorted_compact_output() {
        let v = json!({"b": [1, 0.25, true, null], "a": {"z": "x\ny", "é": 2, "B": -3}});
        assert_eq!(canon(v), r#"{"a":{"B":-3,"z":"x\ny","é":2},"b":[1,0.25,true,null]}"#);
    }

    #[test]
    fn empty_input_digest() {
        assert_eq!(
            compute_txid(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            compute_txid(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(is_valid_txid(&compute_txid(b"x")));
        assert!(!is_valid_txid("ABC"));
    }

    #[test]
    fn trace_object_round_trips() {
        let trace = json!({
            "inputs": {"asr_conf": 0.9582073547338185, "arousal": 0.12, "valence": 0.02},
            "fired_rules": [
                {"if": ["asr_conf is high"], "then": "w_text is high", "strength": 0.9164147094676},
                {"if": ["arousal is low", "valence is pos"], "then": "w_text is high", "strength": 0.0},
                {"if": ["valence is neu"], "then": "w_text is mid", "strength": 1.0}
            ],
            "out_sets": {"low": 0.0, "mid": 1.0, "high": 0.9164147094676}
        });
        let bytes = canonicalize_value(&trace).unwrap();
        let parsed: Value = serde_json::from_slice(&bytes).unwrap();
        let close = |a: &Value, b: &Value| (a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-12;
        assert!(close(&parsed["inputs"]["asr_conf"], &trace["inputs"]["asr_conf"]));
        assert_eq!(parsed["fired_rules"][1]["if"], trace["fired_rules"][1]["if"]);
        assert!(close(&parsed["out_sets"]["high"], &trace["out_sets"]["high"]));
        assert_eq!(recanonicalize(&bytes).unwrap(), bytes);
    }

    fn arb_json() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(|i| json!(i)),
            (-1e9f64..1e9).prop_map(|f| json!(f)),
            (-1.0f64..1.0).prop_map(|f| json!(f)),
            "[a-zñé \\n\"\\\\]{0,8}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-zA-Z_]{1,6}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_then_canonicalize_is_idempotent(v in arb_json()) {
            let once = canonicalize_value(&v).unwrap();
            prop_assert!(!once.contains(&b'\n'));
            prop_assert_eq!(recanonicalize(&once).unwrap(), once);
        }

        #[test]
        fn digest_changes_on_any_bit_flip(bytes in prop::collection::vec(any::<u8>(), 1..64), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let mut flipped = bytes.clone();
            flipped[pos.index(bytes.len())] ^= 1 << bit;
            prop_assert_ne!(compute_txid(&bytes), compute_txid(&flipped));
        }
    }
}
