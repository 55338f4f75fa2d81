//! Scoring rules and feedback text for both game modes.
//!
//! Everything here is pure. Dynamic points are computed in exact integer
//! hundredths, so totals never drift.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::Hundredths;
use crate::year::{Year, YearGap, YearGuess};

/// Points for an answer judged correct under the mode's rule.
pub const STATIC_AWARD: u32 = 10;
/// Largest absolute error (in years) that still earns the static award.
pub const STATIC_TOLERANCE_YEARS: u32 = 5;
/// Errors beyond this many years are treated as this many.
pub const DYNAMIC_ERROR_CAP: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("timeline images share the same year")]
    EqualYears,
    #[error("timeline bonus requires a non-zero year gap")]
    ZeroGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Points {
    pub static_points: u32,
    pub dynamic_points: Hundredths,
}

impl Points {
    pub const NONE: Points = Points {
        static_points: 0,
        dynamic_points: Hundredths::ZERO,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimelineChoice {
    Left,
    Right,
}

impl TimelineChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            TimelineChoice::Left => "left",
            TimelineChoice::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(TimelineChoice::Left),
            "right" => Some(TimelineChoice::Right),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            TimelineChoice::Left => TimelineChoice::Right,
            TimelineChoice::Right => TimelineChoice::Left,
        }
    }
}

impl fmt::Display for TimelineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineOutcome {
    pub correct: bool,
    pub points: Points,
    pub feedback: String,
}

pub fn score_year_static(guess: YearGuess, actual: Year) -> u32 {
    if guess.error(actual) <= STATIC_TOLERANCE_YEARS {
        STATIC_AWARD
    } else {
        0
    }
}

pub fn score_year_dynamic(guess: YearGuess, actual: Year) -> Hundredths {
    dynamic_points_for_error(guess.error(actual))
}

/// `10 * (1 - min(error, 100) / 100)` in hundredths, i.e. `10 * (100 - min(error, 100))`.
///
/// Takes a raw error so the cap can be exercised; valid years never get
/// further apart than 69.
pub fn dynamic_points_for_error(error_years: u32) -> Hundredths {
    let capped = error_years.min(DYNAMIC_ERROR_CAP);
    Hundredths::from_units(10 * (DYNAMIC_ERROR_CAP - capped) as i64)
}

/// Static and dynamic points for a single-image guess.
pub fn score_year(guess: YearGuess, actual: Year) -> Points {
    Points {
        static_points: score_year_static(guess, actual),
        dynamic_points: score_year_dynamic(guess, actual),
    }
}

pub fn timeline_correct(
    choice: TimelineChoice,
    left: Year,
    right: Year,
) -> Result<bool, ScoringError> {
    if left == right {
        return Err(ScoringError::EqualYears);
    }
    Ok(match choice {
        TimelineChoice::Left => left < right,
        TimelineChoice::Right => right < left,
    })
}

/// Gap-dependent bonus for a correct timeline answer:
///
/// ```text
///         | 1.0                 gap <= 10
/// 5.0 *   | 1.0 - (gap - 10)/40 10 < gap <= 50
///         | 0.1                 gap > 50
/// ```
///
/// The middle branch reaches 0 at a gap of 50 while the last branch pays
/// 0.50 from 51 on. Both branches are kept unchanged.
pub fn timeline_bonus(gap: YearGap) -> Result<Hundredths, ScoringError> {
    let delta = gap.years();
    match delta {
        0 => Err(ScoringError::ZeroGap),
        1..=10 => Ok(Hundredths::from_units(500)),
        // 5 * (1 - (d - 10) / 40) == (50 - d) / 8
        11..=50 => Ok(Hundredths::from_ratio_half_up((50 - delta) as u64, 8)),
        _ => Ok(Hundredths::from_units(50)),
    }
}

pub fn score_timeline(
    choice: TimelineChoice,
    left: Year,
    right: Year,
) -> Result<TimelineOutcome, ScoringError> {
    let correct = timeline_correct(choice, left, right)?;
    let points = if correct {
        Points {
            static_points: STATIC_AWARD,
            dynamic_points: timeline_bonus(left.gap(right))?,
        }
    } else {
        Points::NONE
    };
    Ok(TimelineOutcome {
        correct,
        points,
        feedback: feedback_timeline(left, right),
    })
}

/// Reveal text for single-image mode. Falls back to the image id when the
/// catalog has no title.
pub fn feedback_year(actual: Year, title: Option<&str>, img_id: &str) -> String {
    let label = match title.map(str::trim) {
        Some(t) if !t.is_empty() => t,
        _ => img_id,
    };
    format!("Correct year: {actual}. Image: {label}")
}

pub fn feedback_timeline(left: Year, right: Year) -> String {
    format!("Left image is from year {left} and the Right image is from year {right}")
}
