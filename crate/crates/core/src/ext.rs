//! Extended nonnegative reals used for resistance distances.
//!
//! `ExtResistance` is totally ordered as `Zero < Finite(_) < Infinite`, and
//! serializes as a JSON number (`0` for `Zero`) or the string `"inf"`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtResistance {
    /// Distance from a node to itself.
    Zero,
    /// Strictly positive finite value.
    Finite(f64),
    /// No directed path.
    Infinite,
}

impl ExtResistance {
    /// Maps `0` to `Zero`, positive finite values to `Finite` and `+inf` to `Infinite`.
    ///
    /// Negative or NaN inputs are rejected with `None`.
    pub fn from_f64(v: f64) -> Option<Self> {
        if v.is_nan() || v < 0.0 {
            None
        } else if v == 0.0 {
            Some(Self::Zero)
        } else if v.is_infinite() {
            Some(Self::Infinite)
        } else {
            Some(Self::Finite(v))
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Self::Zero => Some(0.0),
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// Value as an `f64`, with `Infinite` mapped to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Raises to a strictly positive power; `Zero` and `Infinite` are fixed points.
    pub fn powf(self, p: f64) -> Self {
        debug_assert!(p > 0.0);
        match self {
            Self::Finite(v) => Self::Finite(v.powf(p)),
            other => other,
        }
    }

    /// Multiplies by a strictly positive scalar.
    pub fn scale(self, k: f64) -> Self {
        debug_assert!(k > 0.0);
        match self {
            Self::Finite(v) => Self::Finite(v * k),
            other => other,
        }
    }

    /// `1/value`: swaps `Zero` and `Infinite`.
    pub fn recip(self) -> Self {
        match self {
            Self::Zero => Self::Infinite,
            Self::Finite(v) => Self::Finite(1.0 / v),
            Self::Infinite => Self::Zero,
        }
    }

    /// `self - other` as an extended real, with `inf - inf = 0`.
    pub fn minus(self, other: Self) -> ExtReal {
        match (self, other) {
            (Self::Infinite, Self::Infinite) => ExtReal::Finite(0.0),
            (Self::Infinite, _) => ExtReal::PosInf,
            (_, Self::Infinite) => ExtReal::NegInf,
            (a, b) => ExtReal::Finite(a.to_f64() - b.to_f64()),
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Relative error `|self - reference| / reference` when both are finite and
    /// the reference is nonzero.
    pub fn relative_error(self, reference: Self) -> Option<f64> {
        match (self, reference) {
            (Self::Finite(v), Self::Finite(r)) => Some((v - r).abs() / r),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Self::Zero => 0,
            Self::Finite(_) => 1,
            Self::Infinite => 2,
        }
    }
}

impl Add for ExtResistance {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Infinite, _) | (_, Self::Infinite) => Self::Infinite,
            (Self::Zero, x) | (x, Self::Zero) => x,
            (Self::Finite(a), Self::Finite(b)) => Self::Finite(a + b),
        }
    }
}

impl PartialOrd for ExtResistance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b),
            _ => Some(self.rank().cmp(&other.rank())),
        }
    }
}

impl fmt::Display for ExtResistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("0"),
            Self::Infinite => f.write_str("inf"),
            Self::Finite(v) => match f.precision() {
                Some(p) => write!(f, "{}", format_sig(*v, p)),
                None => write!(f, "{v}"),
            },
        }
    }
}

impl Serialize for ExtResistance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Zero => serializer.serialize_u8(0),
            Self::Finite(v) => serializer.serialize_f64(*v),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtResistance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtResistance;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                ExtResistance::from_f64(v)
                    .filter(|x| !x.is_infinite())
                    .ok_or_else(|| E::custom(format!("invalid resistance {v}")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse_sentinel(v).ok_or_else(|| E::custom(format!("invalid resistance `{v}`")))
            }
        }

        deserializer.deserialize_any(ExtVisitor)
    }
}

/// Parses the textual forms used in CSV/JSON: `inf`, `0`, or a positive number.
pub fn parse_sentinel(s: &str) -> Option<ExtResistance> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
        return Some(ExtResistance::Infinite);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .and_then(ExtResistance::from_f64)
}

/// Extended real used for signed differences such as triangle slack.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Self::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInf => f.write_str("-inf"),
            Self::PosInf => f.write_str("inf"),
            Self::Finite(v) => match f.precision() {
                Some(p) => write!(f, "{}", format_sig(*v, p)),
                None => write!(f, "{v}"),
            },
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::NegInf => serializer.serialize_str("-inf"),
            Self::Finite(v) => serializer.serialize_f64(*v),
            Self::PosInf => serializer.serialize_str("inf"),
        }
    }
}

/// Formats `v` with `digits` significant digits, trimming trailing zeros.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1);
    let exp = v.abs().log10().floor() as i32;
    if !(-5..16).contains(&exp) {
        let s = format!("{:.*e}", digits - 1, v);
        return trim_mantissa(&s);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn trim_mantissa(s: &str) -> String {
    match s.split_once('e') {
        Some((m, e)) if m.contains('.') => {
            format!("{}e{}", m.trim_end_matches('0').trim_end_matches('.'), e)
        }
        _ => s.to_string(),
    }
}
