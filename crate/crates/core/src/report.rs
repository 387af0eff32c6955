//! Deterministic JSON output: fixed field order from struct declarations and
//! every float printed as `%.12e`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// A float that serializes as a JSON number in `%.12e` format (`null` when not finite).
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Sci(pub f64);

pub fn format_sci(x: f64) -> String {
    format!("{x:.12e}")
}

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format_sci(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl From<f64> for Sci {
    fn from(x: f64) -> Self {
        Sci(x)
    }
}

/// `[re, im]`.
pub fn complex(z: Complex64) -> [Sci; 2] {
    [Sci(z.re), Sci(z.im)]
}

pub fn sci_map<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> BTreeMap<String, Sci> {
    items
        .into_iter()
        .map(|(k, v)| (k.to_owned(), Sci(v)))
        .collect()
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize infallibly");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_fixed_scientific_format() {
        #[derive(Serialize)]
        struct R {
            a: Sci,
            b: Sci,
            c: [Sci; 2],
        }
        let r = R {
            a: Sci(0.1),
            b: Sci(f64::NAN),
            c: complex(Complex64::new(-2.0, 0.0)),
        };
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(
            text,
            r#"{"a":1.000000000000e-1,"b":null,"c":[-2.000000000000e0,0.000000000000e0]}"#
        );
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
