//! Exact rational scalars and their conversions.
//!
//! Every predicate on polytopes and hyperplanes runs on [`Rational`]. Floating
//! point only enters through balls and through search heuristics, and values
//! leaving `f64` are converted exactly (every finite double is a dyadic
//! rational).

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    assert!(d != 0, "zero denominator");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact conversion of a finite double.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::invalid(format!("non-finite value {x}")))
}

/// Rounds `x` to the nearest multiple of `2^-bits`. Keeps heuristic candidate
/// points from carrying 50-bit denominators into exact code.
pub fn from_f64_rounded(x: f64, bits: u32) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("non-finite value {x}")));
    }
    let scale = (1u64 << bits) as f64;
    let n = (x * scale).round();
    let numer = BigInt::from(n as i128);
    Ok(Rational::new(numer, BigInt::from(1u64 << bits)))
}

/// Parses `"3"`, `"-1/4"`, `"2.125"`, `"1e-3"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::invalid(format!("cannot parse rational from {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], i64::from_str(&t[i + 1..]).map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| bad())?;
    if neg {
        numer = -numer;
    }
    let scale = exp - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(bad());
    }
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    Ok(if scale >= 0 {
        Rational::from_integer(numer * pow)
    } else {
        Rational::new(numer, pow)
    })
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn is_one(x: &Rational) -> bool {
    x.is_one()
}

/// Serde adapter: rationals are written as `["num", "den"]` string pairs and
/// read from that form, from `[num, den]` integers, from decimal strings, or
/// from plain JSON numbers.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&x.numer().to_string())?;
        t.serialize_element(&x.denom().to_string())?;
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    struct RationalVisitor;

    fn int_from_str<E: de::Error>(s: &str) -> std::result::Result<BigInt, E> {
        BigInt::from_str(s.trim()).map_err(|_| E::custom(format!("invalid integer {s:?}")))
    }

    struct PartSeed;

    impl<'de> de::DeserializeSeed<'de> for PartSeed {
        type Value = BigInt;
        fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<BigInt, D::Error> {
            struct V;
            impl Visitor<'_> for V {
                type Value = BigInt;
                fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                    f.write_str("an integer or integer string")
                }
                fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<BigInt, E> {
                    Ok(BigInt::from(v))
                }
                fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<BigInt, E> {
                    Ok(BigInt::from(v))
                }
                fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<BigInt, E> {
                    int_from_str(v)
                }
            }
            d.deserialize_any(V)
        }
    }

    impl<'de> Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a rational as [\"num\",\"den\"], a decimal string, or a number")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rational, E> {
            Ok(rat(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rational, E> {
            Ok(Rational::from_integer(BigInt::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Rational, E> {
            // shortest round-trip decimal, so 0.1 reads as 1/10
            parse_rational(&format!("{v}")).map_err(|e| E::custom(e.to_string()))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
            parse_rational(v).map_err(|e| E::custom(e.to_string()))
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Rational, A::Error> {
            let n = seq
                .next_element_seed(PartSeed)?
                .ok_or_else(|| de::Error::invalid_length(0, &self))?;
            let d = seq
                .next_element_seed(PartSeed)?
                .ok_or_else(|| de::Error::invalid_length(1, &self))?;
            if seq.next_element::<de::IgnoredAny>()?.is_some() {
                return Err(de::Error::invalid_length(3, &self));
            }
            if d.is_zero() {
                return Err(de::Error::custom("zero denominator"));
            }
            Ok(Rational::new(n, d))
        }
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_rational_vec {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::serde_rational")] Rational);

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| Wrap(x.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw: Vec<Wrap> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|w| w.0).collect())
    }
}
