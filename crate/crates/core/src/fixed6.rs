//! Fixed six-decimal float formatting for byte-stable JSON output.

use serde::ser::{Error as _, Serialize, SerializeSeq, Serializer};
use serde_json::value::RawValue;

pub(crate) fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Rounds a value to what survives a serialize/parse cycle.
pub fn quantize(x: f64) -> f64 {
    fmt6(x).parse().unwrap_or(x)
}

pub(crate) struct F6(pub f64);

impl Serialize for F6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(fmt6(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub(crate) fn f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    F6(*x).serialize(s)
}

pub(crate) fn opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => F6(*v).serialize(s),
        None => s.serialize_none(),
    }
}

pub(crate) fn quat<S: Serializer>(q: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(4))?;
    for v in q {
        seq.serialize_element(&F6(*v))?;
    }
    seq.end()
}

pub(crate) fn points<S: Serializer>(pts: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(pts.len()))?;
    for p in pts {
        seq.serialize_element(&[F6(p[0]), F6(p[1])])?;
    }
    seq.end()
}
