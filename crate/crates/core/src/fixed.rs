//! Signed decimal fixed-point arithmetic with 18 fractional digits.
//!
//! All token amounts, prices, rates and ratios in this crate share one
//! representation: an `i128` count of units of 10^-18. Addition and
//! subtraction are exact; multiplication and division round half away
//! from zero after computing the full-width product in big integers, so
//! results never depend on evaluation order or platform float behaviour.
//!
//! Values parse from decimal strings (`"398132.18"`, `"-0.06"`, `"1e26"`)
//! and serialize back to decimal strings. Binary floats are deliberately
//! rejected at the serde boundary: a JSON `0.1` is not the same number as
//! the decimal string `"0.1"`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Number of decimal fraction digits carried by [`Fixed`].
pub const SCALE: u32 = 18;

/// 10^18, the raw representation of 1.0.
pub const UNIT: i128 = 1_000_000_000_000_000_000;

/// A signed decimal fixed-point number with 18 fractional digits.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(i128);

/// Error returned when a decimal string cannot be parsed into a [`Fixed`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{literal}`: {reason}")]
pub struct ParseFixedError {
    pub literal: String,
    pub reason: &'static str,
}

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(UNIT);
    pub const MAX: Fixed = Fixed(i128::MAX);

    /// Wraps a raw count of 10^-18 units.
    pub const fn from_raw(raw: i128) -> Fixed {
        Fixed(raw)
    }

    /// The raw count of 10^-18 units.
    pub const fn raw(self) -> i128 {
        self.0
    }

    /// Converts a whole number.
    pub const fn from_int(n: i64) -> Fixed {
        Fixed(n as i128 * UNIT)
    }

    /// `num / den` rounded half away from zero. Panics if `den == 0`.
    pub fn from_ratio(num: i64, den: i64) -> Fixed {
        assert!(den != 0, "from_ratio denominator is zero");
        Fixed::from_int(num)
            .checked_div(Fixed::from_int(den))
            .expect("from_ratio overflow")
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub const fn abs(self) -> Fixed {
        Fixed(self.0.abs())
    }

    pub fn min(self, other: Fixed) -> Fixed {
        Fixed(self.0.min(other.0))
    }

    pub fn max(self, other: Fixed) -> Fixed {
        Fixed(self.0.max(other.0))
    }

    pub fn checked_add(self, rhs: Fixed) -> Option<Fixed> {
        self.0.checked_add(rhs.0).map(Fixed)
    }

    pub fn checked_sub(self, rhs: Fixed) -> Option<Fixed> {
        self.0.checked_sub(rhs.0).map(Fixed)
    }

    /// `self * rhs`, rounded half away from zero.
    pub fn checked_mul(self, rhs: Fixed) -> Option<Fixed> {
        self.checked_mul_div(rhs, Fixed::ONE)
    }

    /// `self / rhs`, rounded half away from zero. `None` if `rhs == 0`.
    pub fn checked_div(self, rhs: Fixed) -> Option<Fixed> {
        self.checked_mul_div(Fixed::ONE, rhs)
    }

    /// Fused `self * num / den` computed at full precision and rounded
    /// half away from zero once. `None` on division by zero or overflow.
    ///
    /// Rounding only once keeps identities such as
    /// `x.checked_mul_div(a, a) == x` intact and lets a quantity divided
    /// by `d` and multiplied back by `d` recover the original value
    /// whenever `|d| <= 1`.
    pub fn checked_mul_div(self, num: Fixed, den: Fixed) -> Option<Fixed> {
        if den.0 == 0 {
            return None;
        }
        let p = BigInt::from(self.0) * BigInt::from(num.0);
        let d = BigInt::from(den.0);
        let q = div_round_half_away(p, d);
        i128::try_from(q).ok().map(Fixed)
    }

    /// Parses an integer literal expressed in ray units (27 decimals, the
    /// on-chain rate convention) and rescales it to the 18-digit grid,
    /// rounding half away from zero. `"1e26"` becomes `0.1`.
    pub fn from_ray_str(s: &str) -> Result<Fixed, ParseFixedError> {
        const RAY_SCALE: u32 = 27;
        let err = |reason| ParseFixedError {
            literal: s.to_string(),
            reason,
        };
        let (mantissa, shift) =
            split_decimal_literal(s).ok_or_else(|| err("expected an integer ray value"))?;
        let mut value = BigInt::from(mantissa);
        let net = shift + SCALE as i32 - RAY_SCALE as i32;
        if net >= 0 {
            for _ in 0..net {
                value *= 10;
            }
        } else {
            let mut den = BigInt::from(1);
            for _ in 0..-net {
                den *= 10;
            }
            value = div_round_half_away(value, den);
        }
        i128::try_from(value)
            .map(Fixed)
            .map_err(|_| err("ray value overflows fixed-point range"))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / UNIT as f64
    }

    /// Quantizes a float to the fixed grid (round half away from zero).
    /// `None` for non-finite or out-of-range inputs.
    pub fn from_f64(value: f64) -> Option<Fixed> {
        if !value.is_finite() {
            return None;
        }
        let scaled = value * UNIT as f64;
        if scaled >= i128::MAX as f64 || scaled <= i128::MIN as f64 {
            return None;
        }
        Some(Fixed(scaled.round() as i128))
    }
}

/// Big-integer division rounding half away from zero.
pub(crate) fn div_round_half_away(p: BigInt, d: BigInt) -> BigInt {
    let q = &p / &d;
    let r = &p - &q * &d;
    let r2: BigInt = r.magnitude().clone().into();
    if r2 * 2 >= d.magnitude().clone().into() {
        let bump = if (p.sign() == num_bigint::Sign::Minus) != (d.sign() == num_bigint::Sign::Minus)
        {
            -1
        } else {
            1
        };
        q + bump
    } else {
        q
    }
}

impl std::ops::Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        self.checked_add(rhs).expect("fixed-point addition overflow")
    }
}

impl std::ops::Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        self.checked_sub(rhs).expect("fixed-point subtraction overflow")
    }
}

impl std::ops::Neg for Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(self.0.checked_neg().expect("fixed-point negation overflow"))
    }
}

impl std::ops::AddAssign for Fixed {
    fn add_assign(&mut self, rhs: Fixed) {
        *self = *self + rhs;
    }
}

impl std::ops::SubAssign for Fixed {
    fn sub_assign(&mut self, rhs: Fixed) {
        *self = *self - rhs;
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let mag = self.0.unsigned_abs();
        let whole = mag / UNIT as u128;
        let frac = mag % UNIT as u128;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:018}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed({self})")
    }
}

impl FromStr for Fixed {
    type Err = ParseFixedError;

    fn from_str(s: &str) -> Result<Fixed, ParseFixedError> {
        parse_decimal(s).ok_or_else(|| ParseFixedError {
            literal: s.to_string(),
            reason: "expected a decimal number with at most 18 fraction digits",
        })
    }
}

/// Splits `[-]digits[.digits][(e|E)[+-]digits]` into a signed digit
/// mantissa and the net decimal shift (`exponent - fraction digits`).
fn split_decimal_literal(s: &str) -> Option<(i128, i32)> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (mantissa_str, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().ok()?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa_str.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa_str.strip_prefix('+').unwrap_or(mantissa_str)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let mut mag: u128 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        mag = mag.checked_mul(10)?.checked_add((b - b'0') as u128)?;
    }
    let mantissa = i128::try_from(mag).ok()?;
    let shift = exp.checked_sub(frac_part.len() as i32)?;
    Some((if neg { -mantissa } else { mantissa }, shift))
}

/// Parses a decimal literal exactly, with no float round-trip. Returns
/// `None` on malformed input, more than 18 significant fraction digits,
/// or overflow.
fn parse_decimal(s: &str) -> Option<Fixed> {
    let (mantissa, shift) = split_decimal_literal(s)?;
    let net = shift.checked_add(SCALE as i32)?;
    let mut raw = mantissa;
    if net >= 0 {
        for _ in 0..net {
            raw = raw.checked_mul(10)?;
        }
    } else {
        // Digits below 10^-18 must all be zero; silent truncation would
        // hide a precision loss in scenario inputs.
        for _ in 0..(-net) {
            if raw % 10 != 0 {
                return None;
            }
            raw /= 10;
        }
    }
    Some(Fixed(raw))
}

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fixed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Fixed, D::Error> {
        struct FixedVisitor;

        impl de::Visitor<'_> for FixedVisitor {
            type Value = Fixed;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string such as \"0.8\" (JSON floats are rejected)")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Fixed, E> {
                v.parse().map_err(|e: ParseFixedError| E::custom(e))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Fixed, E> {
                Ok(Fixed::from_int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Fixed, E> {
                i128::try_from(v)
                    .ok()
                    .and_then(|n| n.checked_mul(UNIT))
                    .map(Fixed)
                    .ok_or_else(|| E::custom("integer overflows fixed-point range"))
            }

            fn visit_f64<E: de::Error>(self, _: f64) -> Result<Fixed, E> {
                Err(E::custom(
                    "binary floats are rejected; quote the value as a decimal string",
                ))
            }
        }

        deserializer.deserialize_any(FixedVisitor)
    }
}

impl PartialEq<i64> for Fixed {
    fn eq(&self, other: &i64) -> bool {
        *self == Fixed::from_int(*other)
    }
}

impl PartialOrd<i64> for Fixed {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.partial_cmp(&Fixed::from_int(*other))
    }
}

/// Shorthand used throughout the crate and its tests.
pub fn fx(s: &str) -> Fixed {
    s.parse().expect("literal fixed-point value")
}
