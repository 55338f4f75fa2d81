//! Aggregates over the gameplay log: per-mode accuracy, per-decade
//! performance, accuracy by age bracket, engagement concentration and a
//! weekly retention measure.
//!
//! All functions are pure over their inputs and independent of input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::engine::{AbandonedRound, GamePlay, PlayMode};
use crate::fixed::{Hundredths, Tenths};
use crate::persistence::{AgeBracket, UserAccount, UserId};
use crate::year::{Year, FIRST_YEAR, LAST_YEAR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("correct count {correct} exceeds total {total}")]
    CorrectExceedsTotal { correct: u64, total: u64 },
    #[error("play references unknown image {0:?}")]
    UnknownImage(String),
}

/// `100 * correct / total`, half-up to two decimals; `None` when `total` is 0.
pub fn accuracy(correct: u64, total: u64) -> Result<Option<Hundredths>, AnalyticsError> {
    if correct > total {
        return Err(AnalyticsError::CorrectExceedsTotal { correct, total });
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(Hundredths::from_ratio_half_up(100 * correct, total)))
}

fn percent_tenths(correct: u64, total: u64) -> Option<Tenths> {
    (total > 0).then(|| Tenths::from_ratio_half_up(100 * correct, total))
}

/// A ten-year bucket, identified by its first year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decade(u16);

impl Decade {
    pub fn start(self) -> u16 {
        self.0
    }

    /// 1930s through 1990s.
    pub fn all() -> impl Iterator<Item = Decade> {
        (FIRST_YEAR / 10..=LAST_YEAR / 10).map(|d| Decade(d * 10))
    }
}

impl fmt::Display for Decade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

impl Serialize for Decade {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn decade_of(year: Year) -> Decade {
    Decade(year.get() / 10 * 10)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecadeStats {
    pub decade: Decade,
    pub total_guesses: u64,
    pub total_images_shown: u64,
    pub correct_guesses: u64,
    /// `None` when there were no guesses.
    pub correct_pct: Option<Tenths>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecadeOptions {
    pub include_demo: bool,
}

/// The guess events a play contributes: one per image shown, each carrying
/// the play's correctness. Swapping the attribution rule only touches this.
pub fn guess_events(play: &GamePlay) -> impl Iterator<Item = (&str, bool)> {
    let correct = play.correct;
    play.input.image_ids().into_iter().map(move |id| (id, correct))
}

/// Per-decade guesses, appearances and correct percentage, for all seven
/// decades in order. Abandoned rounds count as appearances only.
pub fn decade_stats(
    plays: &[GamePlay],
    abandoned: &[AbandonedRound],
    catalog: &Catalog,
    options: DecadeOptions,
) -> Result<Vec<DecadeStats>, AnalyticsError> {
    #[derive(Default)]
    struct Acc {
        guesses: u64,
        shown: u64,
        correct: u64,
    }
    let mut acc: BTreeMap<Decade, Acc> = Decade::all().map(|d| (d, Acc::default())).collect();
    let decade = |id: &str| {
        catalog
            .year_of(id)
            .map(decade_of)
            .ok_or_else(|| AnalyticsError::UnknownImage(id.to_owned()))
    };

    for play in plays.iter().filter(|p| options.include_demo || !p.identity.is_demo()) {
        for (id, correct) in guess_events(play) {
            let a = acc.get_mut(&decade(id)?).expect("all decades present");
            a.guesses += 1;
            a.shown += 1;
            a.correct += correct as u64;
        }
    }
    for round in abandoned.iter().filter(|r| options.include_demo || !r.identity.is_demo()) {
        for id in &round.image_ids {
            acc.get_mut(&decade(id)?).expect("all decades present").shown += 1;
        }
    }

    Ok(acc
        .into_iter()
        .map(|(decade, a)| DecadeStats {
            decade,
            total_guesses: a.guesses,
            total_images_shown: a.shown,
            correct_guesses: a.correct,
            correct_pct: percent_tenths(a.correct, a.guesses),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModeCounts {
    pub correct: u64,
    pub total: u64,
}

impl ModeCounts {
    pub fn accuracy(&self) -> Option<Hundredths> {
        accuracy(self.correct, self.total).expect("counts come from plays")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModeAccuracy {
    pub guess_year: ModeCounts,
    pub timeline: ModeCounts,
}

impl ModeAccuracy {
    pub fn add(&mut self, play: &GamePlay) {
        let c = match play.mode() {
            PlayMode::GuessYear => &mut self.guess_year,
            PlayMode::Timeline => &mut self.timeline,
        };
        c.total += 1;
        c.correct += play.correct as u64;
    }

    pub fn get(&self, mode: PlayMode) -> Option<Hundredths> {
        match mode {
            PlayMode::GuessYear => self.guess_year.accuracy(),
            PlayMode::Timeline => self.timeline.accuracy(),
        }
    }
}

impl Serialize for ModeAccuracy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ModeAccuracy", 2)?;
        st.serialize_field("guess_the_year", &self.guess_year.accuracy())?;
        st.serialize_field("timeline_challenge", &self.timeline.accuracy())?;
        st.end()
    }
}

/// Accuracy per mode; a year guess counts as correct within five years.
pub fn mode_accuracy<'a>(plays: impl IntoIterator<Item = &'a GamePlay>) -> ModeAccuracy {
    let mut acc = ModeAccuracy::default();
    for p in plays {
        acc.add(p);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    Bracket(AgeBracket),
    Unspecified,
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeGroup::Bracket(b) => b.fmt(f),
            AgeGroup::Unspecified => f.write_str("unspecified"),
        }
    }
}

/// Mode accuracy per age bracket of registered users. Demo plays and plays
/// by unknown users are skipped; groups without plays are absent.
pub fn age_group_accuracy(plays: &[GamePlay], users: &[UserAccount]) -> BTreeMap<AgeGroup, ModeAccuracy> {
    let brackets: HashMap<UserId, Option<AgeBracket>> =
        users.iter().map(|u| (u.user_id, u.age_bracket)).collect();
    let mut out: BTreeMap<AgeGroup, ModeAccuracy> = BTreeMap::new();
    for play in plays {
        let Some(uid) = play.identity.user_id() else { continue };
        let Some(bracket) = brackets.get(&uid) else { continue };
        let group = bracket.map_or(AgeGroup::Unspecified, AgeGroup::Bracket);
        out.entry(group).or_default().add(play);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngagementSummary {
    pub active_user_count: u64,
    pub total_plays: u64,
    pub top_decile_user_count: u64,
    pub top_decile_play_share: Option<Hundredths>,
    pub avg_plays_top_decile: Option<Tenths>,
}

/// Concentration of registered play among the most active tenth of users
/// (rounded up). Users are ranked by play count.
pub fn engagement(plays: &[GamePlay]) -> EngagementSummary {
    let mut per_user: HashMap<UserId, u64> = HashMap::new();
    for p in plays {
        if let Some(uid) = p.identity.user_id() {
            *per_user.entry(uid).or_default() += 1;
        }
    }
    let mut counts: Vec<u64> = per_user.into_values().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let active = counts.len() as u64;
    let total: u64 = counts.iter().sum();
    let top_n = active.div_ceil(10);
    let top_plays: u64 = counts.iter().take(top_n as usize).sum();
    EngagementSummary {
        active_user_count: active,
        total_plays: total,
        top_decile_user_count: top_n,
        top_decile_play_share: (total > 0).then(|| Hundredths::from_ratio_half_up(100 * top_plays, total)),
        avg_plays_top_decile: (top_n > 0).then(|| Tenths::from_ratio_half_up(top_plays, top_n)),
    }
}

/// Share of users with a registered play in `[from, to]` who played in at
/// least `min_weeks` distinct ISO weeks of that window. Not comparable to
/// any externally reported retention figure.
pub fn retention(plays: &[GamePlay], from: DateTime<Utc>, to: DateTime<Utc>, min_weeks: usize) -> Option<Hundredths> {
    let mut weeks: HashMap<UserId, BTreeSet<(i32, u32)>> = HashMap::new();
    for p in plays.iter().filter(|p| p.played_at >= from && p.played_at <= to) {
        if let Some(uid) = p.identity.user_id() {
            let w = p.played_at.iso_week();
            weeks.entry(uid).or_default().insert((w.year(), w.week()));
        }
    }
    let active = weeks.len() as u64;
    let retained = weeks.values().filter(|w| w.len() >= min_weeks).count() as u64;
    (active > 0).then(|| Hundredths::from_ratio_half_up(100 * retained, active))
}
