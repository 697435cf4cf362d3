//! Group specification files: a JSON document with the rank, the generator
//! matrices (complex entries as `[re, im]` decimal strings, parsed exactly),
//! optional paired circles indexed +-1..+-g, and the precision policy.
//!
//! ```json
//! {
//!   "rank": 2,
//!   "precision_bits": 128,
//!   "generators": [[["1","0"],["0","0"],["0","0"],["25","0"]], ...],
//!   "circles": [
//!     {"index": 1, "center": ["0","0"], "radius": "8", "unbounded": true},
//!     {"index": -1, "center": ["0","0"], "radius": "8/25"}
//!   ]
//! }
//! ```

use rug::Float;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::moebius::{Circle, CirclePair, MarkedSchottkyGroup, MoebiusMap};
use crate::prec::{complex_from_rationals, parse_exact, GaussRational, MIN_PRECISION};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn numeric_string(v: &Value, what: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) if n.is_i64() || n.is_u64() => Ok(n.to_string()),
        Value::Number(_) => Err(bad(format!(
            "{what}: write non-integer numbers as decimal strings to keep parsing exact"
        ))),
        other => Err(bad(format!("{what}: expected a string, got {other}"))),
    }
}

fn parse_complex_parts(v: &Value, what: &str) -> Result<GaussRational> {
    let arr = v
        .as_array()
        .ok_or_else(|| bad(format!("{what}: expected [re, im]")))?;
    if arr.len() != 2 {
        return Err(bad(format!("{what}: expected exactly two parts [re, im]")));
    }
    let re = parse_exact(&numeric_string(&arr[0], what)?)?;
    let im = parse_exact(&numeric_string(&arr[1], what)?)?;
    Ok(GaussRational::new(re, im))
}

/// Parse a group specification document at the library default precision.
pub fn parse_group_spec(text: &str) -> Result<MarkedSchottkyGroup> {
    parse_group_spec_with_default(text, crate::prec::DEFAULT_PRECISION)
}

/// Parse a group specification; `default_precision` applies when the
/// document carries no `precision_bits` field.
pub fn parse_group_spec_with_default(
    text: &str,
    default_precision: u32,
) -> Result<MarkedSchottkyGroup> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| bad(format!("group spec is not valid JSON: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| bad("group spec must be a JSON object"))?;
    let rank = obj
        .get("rank")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("missing or invalid \"rank\""))? as usize;
    if rank == 0 {
        return Err(bad("rank must be at least 1"));
    }
    let precision = match obj.get("precision_bits") {
        None => default_precision.max(MIN_PRECISION),
        Some(v) => {
            let p = v
                .as_u64()
                .ok_or_else(|| bad("\"precision_bits\" must be an integer"))?;
            if p < MIN_PRECISION as u64 || p > 1 << 20 {
                return Err(bad(format!(
                    "\"precision_bits\" must lie in {}..=2^20",
                    MIN_PRECISION
                )));
            }
            p as u32
        }
    };
    let gens_val = obj
        .get("generators")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing \"generators\" array"))?;
    if gens_val.len() != rank {
        return Err(bad(format!(
            "expected {rank} generators, found {}",
            gens_val.len()
        )));
    }
    let mut generators = Vec::with_capacity(rank);
    for (i, g) in gens_val.iter().enumerate() {
        let entries = g
            .as_array()
            .ok_or_else(|| bad(format!("generator {} must be [a, b, c, d]", i + 1)))?;
        if entries.len() != 4 {
            return Err(bad(format!("generator {} must have 4 entries", i + 1)));
        }
        let what = format!("generator {}", i + 1);
        let quad = [
            parse_complex_parts(&entries[0], &what)?,
            parse_complex_parts(&entries[1], &what)?,
            parse_complex_parts(&entries[2], &what)?,
            parse_complex_parts(&entries[3], &what)?,
        ];
        generators.push(MoebiusMap::from_exact(quad, precision)?);
    }
    let circles = match obj.get("circles") {
        None => None,
        Some(Value::Null) => None,
        Some(v) => {
            let arr = v.as_array().ok_or_else(|| bad("\"circles\" must be an array"))?;
            if arr.len() != 2 * rank {
                return Err(bad(format!(
                    "expected {} circles, found {}",
                    2 * rank,
                    arr.len()
                )));
            }
            let mut plus: Vec<Option<Circle>> = vec![None; rank];
            let mut minus: Vec<Option<Circle>> = vec![None; rank];
            for c in arr {
                let co = c.as_object().ok_or_else(|| bad("each circle must be an object"))?;
                let index = co
                    .get("index")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| bad("circle missing integer \"index\""))?;
                if index == 0 || index.unsigned_abs() as usize > rank {
                    return Err(bad(format!("circle index {index} out of range")));
                }
                let center = parse_complex_parts(
                    co.get("center").ok_or_else(|| bad("circle missing \"center\""))?,
                    "circle center",
                )?;
                let radius_str = numeric_string(
                    co.get("radius").ok_or_else(|| bad("circle missing \"radius\""))?,
                    "circle radius",
                )?;
                let radius_rat = parse_exact(&radius_str)?;
                if radius_rat <= 0 {
                    return Err(bad("circle radius must be positive"));
                }
                let unbounded = co
                    .get("unbounded")
                    .map(|b| b.as_bool().ok_or_else(|| bad("\"unbounded\" must be a boolean")))
                    .transpose()?
                    .unwrap_or(false);
                let circle = Circle {
                    center: complex_from_rationals(&center.re, &center.im, precision),
                    radius: Float::with_val(precision, &radius_rat),
                    unbounded,
                };
                let slot = index.unsigned_abs() as usize - 1;
                let target = if index > 0 { &mut plus[slot] } else { &mut minus[slot] };
                if target.is_some() {
                    return Err(bad(format!("duplicate circle index {index}")));
                }
                *target = Some(circle);
            }
            let mut pairs = Vec::with_capacity(rank);
            for i in 0..rank {
                let p = plus[i]
                    .take()
                    .ok_or_else(|| bad(format!("missing circle with index {}", i + 1)))?;
                let m = minus[i]
                    .take()
                    .ok_or_else(|| bad(format!("missing circle with index -{}", i + 1)))?;
                pairs.push(CirclePair { plus: p, minus: m });
            }
            Some(pairs)
        }
    };
    MarkedSchottkyGroup::new(generators, circles, precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn bundled_documents_parse_and_validate() {
        for text in [samples::group_a_json(128), samples::group_b_json(128)] {
            let group = parse_group_spec(&text).unwrap();
            assert_eq!(group.rank(), 2);
            assert_eq!(group.precision(), 128);
            crate::moebius::validate_schottky(&group).unwrap();
        }
        let nonreal = parse_group_spec(&samples::nonreal_group_json(96)).unwrap();
        assert!(!nonreal.is_real());
        assert_eq!(nonreal.precision(), 96);
    }

    #[test]
    fn parsed_group_matches_builtin() {
        let parsed = parse_group_spec(&samples::group_a_json(128)).unwrap();
        let built = samples::group_a(128);
        for i in 0..2 {
            assert!(parsed
                .generator(i)
                .projectively_eq(built.generator(i), &Float::with_val(128, 1e-35)));
        }
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(matches!(parse_group_spec("not json"), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_group_spec("{}"), Err(Error::InvalidInput(_))));
        let missing_gen = r#"{"rank": 2, "generators": [[["1","0"],["0","0"],["0","0"],["25","0"]]]}"#;
        assert!(matches!(parse_group_spec(missing_gen), Err(Error::InvalidInput(_))));
        let float_entry = r#"{"rank": 1, "generators": [[[1.5, "0"],["0","0"],["0","0"],["25","0"]]]}"#;
        assert!(matches!(parse_group_spec(float_entry), Err(Error::InvalidInput(_))));
        let parabolic = r#"{"rank": 1, "generators": [[["1","0"],["1","0"],["0","0"],["1","0"]]]}"#;
        assert!(parse_group_spec(parabolic).is_err());
    }
}
