//! Fixed-point decimals for point totals and percentages.
//!
//! Values are integers counting `10^-DIGITS` units. They add exactly, render
//! with exactly `DIGITS` fraction digits and travel over the wire as strings.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed<const DIGITS: u32>(i64);

/// Two fraction digits: dynamic points and accuracy percentages.
pub type Hundredths = Fixed<2>;
/// One fraction digit: chart-style percentages.
pub type Tenths = Fixed<1>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid fixed-point literal {0:?}")]
pub struct ParseFixedError(String);

impl<const DIGITS: u32> Fixed<DIGITS> {
    pub const ZERO: Self = Fixed(0);
    const SCALE: i64 = 10i64.pow(DIGITS);

    pub const fn from_units(units: i64) -> Self {
        Fixed(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    pub fn from_int(whole: i64) -> Self {
        Fixed(whole * Self::SCALE)
    }

    /// `numer / denom` rounded half-up to `DIGITS` fraction digits.
    ///
    /// Panics if `denom` is zero.
    pub fn from_ratio_half_up(numer: u64, denom: u64) -> Self {
        assert!(denom > 0, "zero denominator");
        let scaled = numer as u128 * Self::SCALE as u128;
        let units = (2 * scaled + denom as u128) / (2 * denom as u128);
        Fixed(units as i64)
    }

    /// Re-round to fewer fraction digits, half away from zero.
    pub fn round_to<const FEWER: u32>(self) -> Fixed<FEWER> {
        assert!(FEWER <= DIGITS);
        let div = 10i64.pow(DIGITS - FEWER);
        let half = div / 2;
        let units = if div == 1 {
            self.0
        } else if self.0 >= 0 {
            (self.0 + half) / div
        } else {
            (self.0 - half) / div
        };
        Fixed(units)
    }

    /// Lossless conversion to more fraction digits.
    pub fn widen<const MORE: u32>(self) -> Fixed<MORE> {
        assert!(MORE >= DIGITS);
        Fixed(self.0 * 10i64.pow(MORE - DIGITS))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl<const DIGITS: u32> Add for Fixed<DIGITS> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Fixed(self.0 + rhs.0)
    }
}

impl<const DIGITS: u32> AddAssign for Fixed<DIGITS> {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl<const DIGITS: u32> Sum for Fixed<DIGITS> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        Fixed(iter.map(|f| f.0).sum())
    }
}

impl<const DIGITS: u32> fmt::Display for Fixed<DIGITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = Self::SCALE as u64;
        if DIGITS == 0 {
            write!(f, "{sign}{abs}")
        } else {
            write!(
                f,
                "{sign}{}.{:0width$}",
                abs / scale,
                abs % scale,
                width = DIGITS as usize
            )
        }
    }
}

impl<const DIGITS: u32> FromStr for Fixed<DIGITS> {
    type Err = ParseFixedError;

    /// Accepts at most `DIGITS` fraction digits; fewer are zero-padded.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFixedError(s.to_owned());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
        if whole.is_empty()
            || !whole.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > DIGITS as usize
            || (body.contains('.') && frac.is_empty())
        {
            return Err(err());
        }
        let whole: i64 = whole.parse().map_err(|_| err())?;
        let mut frac_units: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        frac_units *= 10i64.pow(DIGITS - frac.len() as u32);
        let units = whole
            .checked_mul(Self::SCALE)
            .and_then(|w| w.checked_add(frac_units))
            .ok_or_else(err)?;
        Ok(Fixed(if neg { -units } else { units }))
    }
}

impl<const DIGITS: u32> Serialize for Fixed<DIGITS> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de, const DIGITS: u32> Deserialize<'de> for Fixed<DIGITS> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_pads_fraction() {
        assert_eq!(Hundredths::from_units(1000).to_string(), "10.00");
        assert_eq!(Hundredths::from_units(5).to_string(), "0.05");
        assert_eq!(Hundredths::from_units(160506).to_string(), "1605.06");
        assert_eq!(Tenths::from_units(659).to_string(), "65.9");
        assert_eq!(Hundredths::from_units(-5).to_string(), "-0.05");
    }

    #[test]
    fn ratio_rounds_half_up() {
        // 39 / 8 = 4.875
        assert_eq!(Hundredths::from_ratio_half_up(39, 8).units(), 488);
        assert_eq!(Hundredths::from_ratio_half_up(1, 3).units(), 33);
        assert_eq!(Hundredths::from_ratio_half_up(2, 3).units(), 67);
        assert_eq!(Hundredths::from_ratio_half_up(0, 7).units(), 0);
    }

    #[test]
    fn round_to_fewer_digits() {
        assert_eq!(Hundredths::from_units(6586).round_to::<1>().to_string(), "65.9");
        assert_eq!(Hundredths::from_units(6585).round_to::<1>().to_string(), "65.9");
        assert_eq!(Hundredths::from_units(6584).round_to::<1>().to_string(), "65.8");
        assert_eq!(Tenths::from_units(659).widen::<2>().to_string(), "65.90");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert_eq!("10.00".parse::<Hundredths>().unwrap().units(), 1000);
        assert_eq!("3.1".parse::<Hundredths>().unwrap().units(), 310);
        assert_eq!("7".parse::<Hundredths>().unwrap().units(), 700);
        for bad in ["", ".5", "1.", "1.234", "a.00", "1e3", "--1"] {
            assert!(bad.parse::<Hundredths>().is_err(), "{bad}");
        }
    }

    #[test]
    fn serde_uses_strings() {
        let v = Hundredths::from_units(1000);
        assert_eq!(serde_json::to_string(&v).unwrap(), "\"10.00\"");
        let back: Hundredths = serde_json::from_str("\"10.00\"").unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Hundredths>("10").is_err());
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(units in -10_000_000i64..10_000_000) {
            let v = Hundredths::from_units(units);
            prop_assert_eq!(v.to_string().parse::<Hundredths>().unwrap(), v);
        }

        #[test]
        fn sum_is_exact(parts in proptest::collection::vec(0i64..100_000, 0..200)) {
            let total: Hundredths = parts.iter().copied().map(Hundredths::from_units).sum();
            prop_assert_eq!(total.units(), parts.iter().sum::<i64>());
        }
    }
}
