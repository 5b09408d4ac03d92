//! Serde helpers: non-finite floats travel as the strings `"inf"`, `"-inf"`
//! and `"nan"` so JSON output stays valid.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use std::fmt;
use std::marker::PhantomData;

use crate::scalar::{lit, to_f64, Real};

fn ser<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    let x = to_f64(*v);
    if x.is_finite() {
        s.serialize_f64(x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

struct FloatVisitor<T>(PhantomData<T>);

impl<'de, T: Real> Visitor<'de> for FloatVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<T, E> {
        Ok(lit(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<T, E> {
        Ok(lit(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<T, E> {
        Ok(lit(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
        match v {
            "inf" => Ok(T::infinity()),
            "-inf" => Ok(T::neg_infinity()),
            "nan" => Ok(T::nan()),
            other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
        }
    }
}

/// `#[serde(with = "float")]` for a scalar field.
pub mod float {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        ser(v, s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        d.deserialize_any(FloatVisitor(PhantomData))
    }
}

/// `#[serde(with = "opt_float")]` for an optional scalar field.
pub mod opt_float {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => ser(x, s),
            None => s.serialize_none(),
        }
    }

    struct OptVisitor<T>(PhantomData<T>);

    impl<'de, T: Real> Visitor<'de> for OptVisitor<T> {
        type Value = Option<T>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("null, a number, or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
            d.deserialize_any(FloatVisitor(PhantomData)).map(Some)
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        d.deserialize_option(OptVisitor(PhantomData))
    }
}
