//! Calendar years covered by the photo catalog.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First year present in the catalog.
pub const FIRST_YEAR: u16 = 1930;
/// Last year present in the catalog.
pub const LAST_YEAR: u16 = 1999;
/// Number of distinct catalog years.
pub const YEAR_SPAN: usize = (LAST_YEAR - FIRST_YEAR + 1) as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("year {0} is outside {FIRST_YEAR}..={LAST_YEAR}")]
pub struct YearOutOfRange(pub i64);

/// A ground-truth capture year, always within the catalog range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u16")]
pub struct Year(u16);

impl Year {
    pub fn new(value: i64) -> Result<Self, YearOutOfRange> {
        if (FIRST_YEAR as i64..=LAST_YEAR as i64).contains(&value) {
            Ok(Year(value as u16))
        } else {
            Err(YearOutOfRange(value))
        }
    }

    pub fn get(self) -> u16 {
        self.0
    }

    /// Every year of the catalog range in ascending order.
    pub fn all() -> impl DoubleEndedIterator<Item = Year> + ExactSizeIterator {
        (FIRST_YEAR..=LAST_YEAR).map(Year)
    }

    pub fn gap(self, other: Year) -> YearGap {
        YearGap(self.0.abs_diff(other.0) as u32)
    }
}

impl TryFrom<i64> for Year {
    type Error = YearOutOfRange;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Year::new(value)
    }
}

impl From<Year> for u16 {
    fn from(y: Year) -> u16 {
        y.0
    }
}

impl fmt::Display for Year {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}

/// A player's estimate in single-image mode. Same range as [`Year`]: the
/// input control never offers anything outside the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u16")]
pub struct YearGuess(u16);

impl YearGuess {
    pub fn new(value: i64) -> Result<Self, YearOutOfRange> {
        Year::new(value).map(|y| YearGuess(y.get()))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    /// Absolute error against the true year.
    pub fn error(self, actual: Year) -> u32 {
        self.0.abs_diff(actual.get()) as u32
    }
}

impl TryFrom<i64> for YearGuess {
    type Error = YearOutOfRange;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        YearGuess::new(value)
    }
}

impl From<YearGuess> for u16 {
    fn from(y: YearGuess) -> u16 {
        y.0
    }
}

impl fmt::Display for YearGuess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}

/// Absolute distance in years between two images of a timeline round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearGap(pub u32);

impl YearGap {
    pub fn years(self) -> u32 {
        self.0
    }
}
