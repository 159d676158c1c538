//! Exact rational arithmetic for machine costs and competitive ratios.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};
use thiserror::Error;

/// Exact cost value. All cost accounting and ratio comparisons go through this type.
pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational `{input}`: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

fn parse_err(input: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        input: input.to_string(),
        reason,
    }
}

/// Parses `"7"`, `"3/2"`, or a finite decimal such as `"1.25"` without going through floats.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let s = input.trim();
    if s.is_empty() {
        return Err(parse_err(input, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| parse_err(input, "bad numerator"))?;
        let den: i128 = den.trim().parse().map_err(|_| parse_err(input, "bad denominator"))?;
        if den == 0 {
            return Err(parse_err(input, "zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(s).ok_or_else(|| parse_err(input, "not an integer, fraction or decimal"))
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut numer: i128 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer.checked_mul(10)?.checked_add(i128::from(b - b'0'))?;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten_pow = 10i128.checked_pow(scale.unsigned_abs())?;
    let value = if scale >= 0 {
        Rational::from_integer(numer.checked_mul(ten_pow)?)
    } else {
        Rational::new(numer, ten_pow)
    };
    Some(if negative { -value } else { value })
}

/// `"5"` for integers, `"3/2"` otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

/// 2^k as an exact rational.
pub fn pow2(k: u32) -> Rational {
    Rational::from_integer(1i128 << k)
}

/// Smallest `p ≥ 0` with `value ≤ 2^p`. Values ≤ 1 map to 0.
pub fn ceil_log2(value: &Rational) -> u32 {
    let mut p = 0u32;
    let mut power = Rational::from_integer(1);
    while power < *value {
        power *= 2;
        p += 1;
    }
    p
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values.into_iter().fold(Rational::zero(), |acc, value| acc + value)
}

/// Serde adapter: integers serialize as JSON numbers, fractions as `"p/q"` strings.
/// Deserialization accepts either form, plus decimal numbers.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_integer() {
            if let Ok(v) = i64::try_from(*value.numer()) {
                return serializer.serialize_i64(v);
            }
        }
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }

    struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or a rational string like \"3/2\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(i128::from(v)))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(i128::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            if !v.is_finite() {
                return Err(E::custom("non-finite cost"));
            }
            // Display for f64 prints the shortest string that round-trips.
            parse_rational(&v.to_string()).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }
    }
}

/// Serde adapter for rationals that are always written as strings (reports).
pub mod serde_rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        super::serde_rational::deserialize(deserializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_accepted_forms() {
        assert_eq!(parse_rational("3/2").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("4").unwrap(), Rational::from_integer(4));
        assert_eq!(parse_rational("1.25").unwrap(), Rational::new(5, 4));
        assert_eq!(parse_rational("1.1").unwrap(), Rational::new(11, 10));
        assert_eq!(parse_rational("2e3").unwrap(), Rational::from_integer(2000));
        assert_eq!(parse_rational("15e-1").unwrap(), Rational::new(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn formats_integers_plainly() {
        assert_eq!(format_rational(&Rational::new(6, 4)), "3/2");
        assert_eq!(format_rational(&Rational::from_integer(144)), "144");
    }

    #[test]
    fn ceil_log2_rounds_up() {
        assert_eq!(ceil_log2(&Rational::from_integer(1)), 0);
        assert_eq!(ceil_log2(&Rational::from_integer(3)), 2);
        assert_eq!(ceil_log2(&Rational::from_integer(4)), 2);
        assert_eq!(ceil_log2(&Rational::new(5, 4)), 1);
        assert_eq!(ceil_log2(&Rational::new(1, 2)), 0);
    }
}
