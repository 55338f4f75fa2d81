use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::fixed::Hundredths;
use crate::persistence::UserId;
use crate::scoring::{self, Points, TimelineChoice};
use crate::year::YearGuess;

/// Who a session plays as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Identity {
    User(UserId),
    Demo,
}

impl Identity {
    pub fn user_id(self) -> Option<UserId> {
        match self {
            Identity::User(id) => Some(id),
            Identity::Demo => None,
        }
    }

    pub fn is_demo(self) -> bool {
        self == Identity::Demo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayMode {
    GuessYear,
    Timeline,
}

impl PlayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlayMode::GuessYear => "guess_year",
            PlayMode::Timeline => "timeline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "guess_year" => Some(PlayMode::GuessYear),
            "timeline" => Some(PlayMode::Timeline),
            _ => None,
        }
    }
}

impl fmt::Display for PlayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the player was shown and what they answered. The mode, and with it
/// the number of images, follows from the variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlayInput {
    GuessYear {
        img_id: String,
        guess: YearGuess,
    },
    Timeline {
        left_id: String,
        right_id: String,
        choice: TimelineChoice,
    },
}

impl PlayInput {
    pub fn mode(&self) -> PlayMode {
        match self {
            PlayInput::GuessYear { .. } => PlayMode::GuessYear,
            PlayInput::Timeline { .. } => PlayMode::Timeline,
        }
    }

    pub fn image_ids(&self) -> Vec<&str> {
        match self {
            PlayInput::GuessYear { img_id, .. } => vec![img_id],
            PlayInput::Timeline { left_id, right_id, .. } => vec![left_id, right_id],
        }
    }
}

/// One persisted answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamePlay {
    /// Assigned by storage; `None` until recorded.
    pub play_id: Option<i64>,
    pub identity: Identity,
    pub session_id: String,
    pub input: PlayInput,
    pub correct: bool,
    pub static_points: u32,
    pub dynamic_points: Hundredths,
    pub played_at: DateTime<Utc>,
}

impl GamePlay {
    pub fn mode(&self) -> PlayMode {
        self.input.mode()
    }

    pub fn points(&self) -> Points {
        Points {
            static_points: self.static_points,
            dynamic_points: self.dynamic_points,
        }
    }

    /// Re-score the stored input against catalog years. `None` when an image
    /// is unknown or a timeline pair has equal years.
    pub fn recompute(&self, catalog: &Catalog) -> Option<(bool, Points)> {
        match &self.input {
            PlayInput::GuessYear { img_id, guess } => {
                let actual = catalog.year_of(img_id)?;
                let points = scoring::score_year(*guess, actual);
                Some((points.static_points == scoring::STATIC_AWARD, points))
            }
            PlayInput::Timeline {
                left_id,
                right_id,
                choice,
            } => {
                let left = catalog.year_of(left_id)?;
                let right = catalog.year_of(right_id)?;
                let outcome = scoring::score_timeline(*choice, left, right).ok()?;
                Some((outcome.correct, outcome.points))
            }
        }
    }
}

/// A round that was served but never answered before its session ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbandonedRound {
    pub session_id: String,
    pub identity: Identity,
    pub mode: PlayMode,
    pub image_ids: Vec<String>,
    pub served_at: DateTime<Utc>,
}
