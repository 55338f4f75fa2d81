//! Game sessions: serving rounds with hidden answers, scoring submissions
//! and recording every answer in the gameplay log.
//!
//! Each session sits behind its own mutex, so submissions for one session
//! are serialised while different sessions proceed in parallel. A round is
//! consumed only after its play has been stored; a failed write leaves the
//! round answerable.

mod play;
mod rounds;

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::clock::Clock;
use crate::fixed::Hundredths;
use crate::persistence::{AgeBracket, Repository, SessionRecord, StoreError, UserAccount};
use crate::scoring::{self, ScoringError, TimelineChoice};
use crate::year::{Year, YearGuess};

pub use play::{AbandonedRound, GamePlay, Identity, PlayInput, PlayMode};
pub use rounds::{pick_timeline_pair, pick_year_image, RecentImages};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("catalog needs images from at least two different years")]
    NoDistinctYears,
    #[error("unknown user")]
    UnknownUser,
    #[error("missing, unknown or expired session")]
    Unauthenticated,
    #[error("demo mode is disabled")]
    DemoDisabled,
    #[error("unknown round")]
    UnknownRound,
    #[error("round already answered")]
    RoundAlreadyAnswered,
    #[error("guess {0} is outside 1930..=1999")]
    GuessOutOfRange(i64),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("inconsistent round: {0}")]
    Scoring(#[from] ScoringError),
}

impl EngineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::EmptyCatalog => "EmptyCatalog",
            EngineError::NoDistinctYears => "NoDistinctYears",
            EngineError::UnknownUser => "UnknownUser",
            EngineError::Unauthenticated => "Unauthenticated",
            EngineError::DemoDisabled => "DemoDisabled",
            EngineError::UnknownRound => "UnknownRound",
            EngineError::RoundAlreadyAnswered => "RoundAlreadyAnswered",
            EngineError::GuessOutOfRange(_) => "GuessOutOfRange",
            EngineError::Store(e) => match e {
                StoreError::UsernameTaken => "UsernameTaken",
                StoreError::WeakPassword => "WeakPassword",
                StoreError::InvalidUsername => "InvalidUsername",
                StoreError::InvalidAgeBracket(_) => "InvalidAgeBracket",
                StoreError::AuthFailed => "AuthFailed",
                StoreError::ForeignKeyViolation => "ForeignKeyViolation",
                StoreError::Corrupt(_) | StoreError::Backend(_) => "StorageError",
            },
            EngineError::Scoring(_) => "InternalError",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Images served in a session's last `exclusion_window` picks are not
    /// repeated. 0 disables the window.
    pub exclusion_window: usize,
    /// Sessions idle longer than this are purged along with pending rounds.
    pub session_ttl: Duration,
    /// Oldest pending rounds beyond this count are dropped as abandoned.
    pub max_pending_rounds: usize,
    pub demo_enabled: bool,
    /// Deterministic tokens and picks. Test and simulation use only.
    pub seed: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            exclusion_window: 50,
            session_ttl: Duration::from_secs(24 * 60 * 60),
            max_pending_rounds: 32,
            demo_enabled: true,
            seed: None,
        }
    }
}

/// Returned when a session is opened. `token` is the bearer secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTicket {
    pub token: String,
    pub session_id: String,
    pub identity: Identity,
}

/// Client view of a single-image round. Carries no year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRoundView {
    pub round_id: String,
    pub image_url: String,
}

/// Client view of a timeline round. Carries no years.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRoundView {
    pub round_id: String,
    pub left_image_url: String,
    pub right_image_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearResult {
    pub correct: bool,
    pub correct_year: Year,
    pub title: Option<String>,
    pub static_points: u32,
    pub dynamic_points: Hundredths,
    pub feedback: String,
    pub play_id: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineResult {
    pub correct: bool,
    pub left_year: Year,
    pub right_year: Year,
    pub static_points: u32,
    pub dynamic_points: Hundredths,
    pub feedback: String,
    pub play_id: i64,
}

/// Server-side answer key.
#[derive(Debug, Clone, Copy)]
enum PendingRound {
    Year { image: usize, served_at: DateTime<Utc> },
    Timeline { left: usize, right: usize, served_at: DateTime<Utc> },
}

struct GameSession {
    session_id: String,
    identity: Identity,
    last_active: DateTime<Utc>,
    last_persisted: DateTime<Utc>,
    pending: HashMap<String, PendingRound>,
    pending_order: VecDeque<String>,
    answered: HashSet<String>,
    recent: RecentImages,
    rng: ChaCha8Rng,
}

/// Stored `last_seen_at` is refreshed at most this often.
const TOUCH_INTERVAL_SECS: i64 = 60;

pub fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

/// First few characters of a token, for logs.
pub fn redact_token(token: &str) -> String {
    let prefix: String = token.chars().take(6).collect();
    format!("{prefix}…")
}

pub struct Engine {
    catalog: Arc<Catalog>,
    repo: Arc<dyn Repository>,
    clock: Arc<dyn Clock>,
    config: EngineConfig,
    master_rng: Mutex<ChaCha20Rng>,
    sessions: RwLock<HashMap<String, Arc<Mutex<GameSession>>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("catalog_len", &self.catalog.len())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Engine {
    /// Registers every catalog image with storage so plays can reference them.
    pub fn new(
        catalog: Catalog,
        repo: Arc<dyn Repository>,
        clock: Arc<dyn Clock>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        repo.upsert_images(catalog.records())?;
        let master = match config.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_os_rng(),
        };
        Ok(Engine {
            catalog: Arc::new(catalog),
            repo,
            clock,
            config,
            master_rng: Mutex::new(master),
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn repository(&self) -> &Arc<dyn Repository> {
        &self.repo
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn register(
        &self,
        username: &str,
        password: &str,
        age_bracket: Option<AgeBracket>,
    ) -> Result<UserAccount, EngineError> {
        Ok(self.repo.create_user(username, password, age_bracket, self.clock.now())?)
    }

    pub fn login(&self, username: &str, password: &str) -> Result<SessionTicket, EngineError> {
        let user = self.repo.authenticate(username, password)?;
        self.create_session(Identity::User(user.user_id))
    }

    pub fn start_demo(&self) -> Result<SessionTicket, EngineError> {
        if !self.config.demo_enabled {
            return Err(EngineError::DemoDisabled);
        }
        self.create_session(Identity::Demo)
    }

    pub fn create_session(&self, identity: Identity) -> Result<SessionTicket, EngineError> {
        if let Identity::User(id) = identity {
            if self.repo.user(id)?.is_none() {
                return Err(EngineError::UnknownUser);
            }
        }
        let (token, session_id, seed) = {
            let mut rng = self.master_rng.lock().expect("rng mutex");
            let mut token = [0u8; 32];
            let mut sid = [0u8; 16];
            rng.fill_bytes(&mut token);
            rng.fill_bytes(&mut sid);
            (hex::encode(token), hex::encode(sid), rng.next_u64())
        };
        let now = self.clock.now();
        let digest = token_digest(&token);
        self.repo.save_session(&SessionRecord {
            session_id: session_id.clone(),
            token_digest: digest.clone(),
            identity,
            created_at: now,
            last_seen_at: now,
        })?;
        let session = self.new_session(session_id.clone(), identity, now, seed);
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(digest, Arc::new(Mutex::new(session)));
        tracing::info!(session = %session_id, demo = identity.is_demo(), "session opened");
        Ok(SessionTicket {
            token,
            session_id,
            identity,
        })
    }

    fn new_session(&self, session_id: String, identity: Identity, now: DateTime<Utc>, seed: u64) -> GameSession {
        GameSession {
            session_id,
            identity,
            last_active: now,
            last_persisted: now,
            pending: HashMap::new(),
            pending_order: VecDeque::new(),
            answered: HashSet::new(),
            recent: RecentImages::new(self.config.exclusion_window),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn is_expired(&self, last_active: DateTime<Utc>, now: DateTime<Utc>) -> bool {
        let ttl = chrono::Duration::from_std(self.config.session_ttl).unwrap_or(chrono::Duration::MAX);
        now.signed_duration_since(last_active) > ttl
    }

    /// Find a live session, reviving it from storage after a restart.
    fn session(&self, token: &str) -> Result<Arc<Mutex<GameSession>>, EngineError> {
        let digest = token_digest(token);
        if let Some(s) = self.sessions.read().expect("sessions lock").get(&digest) {
            return Ok(Arc::clone(s));
        }
        let record = self
            .repo
            .session_by_token_digest(&digest)?
            .ok_or(EngineError::Unauthenticated)?;
        let now = self.clock.now();
        if self.is_expired(record.last_seen_at, now) {
            return Err(EngineError::Unauthenticated);
        }
        let seed = self.master_rng.lock().expect("rng mutex").next_u64();
        let revived = Arc::new(Mutex::new(self.new_session(
            record.session_id,
            record.identity,
            record.last_seen_at,
            seed,
        )));
        let mut map = self.sessions.write().expect("sessions lock");
        Ok(Arc::clone(map.entry(digest).or_insert(revived)))
    }

    /// Who a token plays as, and under which session id.
    pub fn whoami(&self, token: &str) -> Result<(Identity, String), EngineError> {
        let s = self.session(token)?;
        let s = s.lock().expect("session lock");
        Ok((s.identity, s.session_id.clone()))
    }

    fn image_url(&self, idx: usize) -> String {
        format!("/images/{}", self.catalog.records()[idx].asset_key())
    }

    fn touch(&self, s: &mut GameSession) -> Result<DateTime<Utc>, EngineError> {
        let now = self.clock.now();
        if self.is_expired(s.last_active, now) {
            return Err(EngineError::Unauthenticated);
        }
        s.last_active = now;
        if now.signed_duration_since(s.last_persisted) > chrono::Duration::seconds(TOUCH_INTERVAL_SECS) {
            self.repo.touch_session(&s.session_id, now)?;
            s.last_persisted = now;
        }
        Ok(now)
    }

    fn add_pending(&self, s: &mut GameSession, round: PendingRound) -> Result<String, EngineError> {
        let mut raw = [0u8; 16];
        s.rng.fill_bytes(&mut raw);
        let round_id = hex::encode(raw);
        while s.pending_order.len() >= self.config.max_pending_rounds.max(1) {
            if let Some(old) = s.pending_order.pop_front() {
                if let Some(round) = s.pending.remove(&old) {
                    self.repo.record_abandoned(&self.abandoned(s, round))?;
                }
            }
        }
        s.pending.insert(round_id.clone(), round);
        s.pending_order.push_back(round_id.clone());
        Ok(round_id)
    }

    fn abandoned(&self, s: &GameSession, round: PendingRound) -> AbandonedRound {
        let records = self.catalog.records();
        let (mode, image_ids, served_at) = match round {
            PendingRound::Year { image, served_at } => {
                (PlayMode::GuessYear, vec![records[image].img_id.clone()], served_at)
            }
            PendingRound::Timeline { left, right, served_at } => (
                PlayMode::Timeline,
                vec![records[left].img_id.clone(), records[right].img_id.clone()],
                served_at,
            ),
        };
        AbandonedRound {
            session_id: s.session_id.clone(),
            identity: s.identity,
            mode,
            image_ids,
            served_at,
        }
    }

    pub fn next_year_round(&self, token: &str) -> Result<YearRoundView, EngineError> {
        let session = self.session(token)?;
        let mut s = session.lock().expect("session lock");
        let now = self.touch(&mut s)?;
        let s = &mut *s;
        let image = pick_year_image(&self.catalog, &mut s.recent, &mut s.rng)?;
        let round_id = self.add_pending(s, PendingRound::Year { image, served_at: now })?;
        Ok(YearRoundView {
            round_id,
            image_url: self.image_url(image),
        })
    }

    pub fn next_timeline_round(&self, token: &str) -> Result<TimelineRoundView, EngineError> {
        let session = self.session(token)?;
        let mut s = session.lock().expect("session lock");
        let now = self.touch(&mut s)?;
        let s = &mut *s;
        let (left, right) = pick_timeline_pair(&self.catalog, &mut s.recent, &mut s.rng)?;
        let round_id = self.add_pending(s, PendingRound::Timeline { left, right, served_at: now })?;
        Ok(TimelineRoundView {
            round_id,
            left_image_url: self.image_url(left),
            right_image_url: self.image_url(right),
        })
    }

    fn pending_round(s: &GameSession, round_id: &str) -> Result<PendingRound, EngineError> {
        match s.pending.get(round_id) {
            Some(r) => Ok(*r),
            None if s.answered.contains(round_id) => Err(EngineError::RoundAlreadyAnswered),
            None => Err(EngineError::UnknownRound),
        }
    }

    fn consume(s: &mut GameSession, round_id: &str) {
        s.pending.remove(round_id);
        s.pending_order.retain(|r| r != round_id);
        s.answered.insert(round_id.to_owned());
    }

    pub fn submit_year_guess(&self, token: &str, round_id: &str, guess: i64) -> Result<YearResult, EngineError> {
        let session = self.session(token)?;
        let mut s = session.lock().expect("session lock");
        let now = self.touch(&mut s)?;
        let PendingRound::Year { image, .. } = Self::pending_round(&s, round_id)? else {
            return Err(EngineError::UnknownRound);
        };
        let guess = YearGuess::new(guess).map_err(|e| EngineError::GuessOutOfRange(e.0))?;
        let record = &self.catalog.records()[image];
        let points = scoring::score_year(guess, record.gt_year);
        let correct = points.static_points == scoring::STATIC_AWARD;
        let play = GamePlay {
            play_id: None,
            identity: s.identity,
            session_id: s.session_id.clone(),
            input: PlayInput::GuessYear {
                img_id: record.img_id.clone(),
                guess,
            },
            correct,
            static_points: points.static_points,
            dynamic_points: points.dynamic_points,
            played_at: now,
        };
        let play_id = self.repo.record_play(&play)?;
        Self::consume(&mut s, round_id);
        Ok(YearResult {
            correct,
            correct_year: record.gt_year,
            title: record.title.clone(),
            static_points: points.static_points,
            dynamic_points: points.dynamic_points,
            feedback: scoring::feedback_year(record.gt_year, record.title.as_deref(), &record.img_id),
            play_id,
        })
    }

    pub fn submit_timeline_choice(
        &self,
        token: &str,
        round_id: &str,
        choice: TimelineChoice,
    ) -> Result<TimelineResult, EngineError> {
        let session = self.session(token)?;
        let mut s = session.lock().expect("session lock");
        let now = self.touch(&mut s)?;
        let PendingRound::Timeline { left, right, .. } = Self::pending_round(&s, round_id)? else {
            return Err(EngineError::UnknownRound);
        };
        let (l, r) = (&self.catalog.records()[left], &self.catalog.records()[right]);
        let outcome = scoring::score_timeline(choice, l.gt_year, r.gt_year)?;
        let play = GamePlay {
            play_id: None,
            identity: s.identity,
            session_id: s.session_id.clone(),
            input: PlayInput::Timeline {
                left_id: l.img_id.clone(),
                right_id: r.img_id.clone(),
                choice,
            },
            correct: outcome.correct,
            static_points: outcome.points.static_points,
            dynamic_points: outcome.points.dynamic_points,
            played_at: now,
        };
        let play_id = self.repo.record_play(&play)?;
        Self::consume(&mut s, round_id);
        Ok(TimelineResult {
            correct: outcome.correct,
            left_year: l.gt_year,
            right_year: r.gt_year,
            static_points: outcome.points.static_points,
            dynamic_points: outcome.points.dynamic_points,
            feedback: outcome.feedback,
            play_id,
        })
    }

    /// Drop sessions idle past the TTL. Their pending rounds are logged as
    /// abandoned. Returns how many in-memory sessions were removed.
    pub fn purge_expired(&self) -> Result<usize, EngineError> {
        let now = self.clock.now();
        let mut expired: Vec<(String, Arc<Mutex<GameSession>>)> = {
            let mut map = self.sessions.write().expect("sessions lock");
            let keys: Vec<String> = map
                .iter()
                .filter(|(_, s)| self.is_expired(s.lock().expect("session lock").last_active, now))
                .map(|(k, _)| k.clone())
                .collect();
            keys.into_iter()
                .filter_map(|k| map.remove(&k).map(|s| (k, s)))
                .collect()
        };
        // Fixed order keeps the abandoned-round log reproducible.
        expired.sort_by_cached_key(|(_, s)| s.lock().expect("session lock").session_id.clone());
        for (_, session) in &expired {
            let mut s = session.lock().expect("session lock");
            let ids: Vec<String> = s.pending_order.drain(..).collect();
            for id in ids {
                if let Some(round) = s.pending.remove(&id) {
                    self.repo.record_abandoned(&self.abandoned(&s, round))?;
                }
            }
            self.repo.touch_session(&s.session_id, s.last_active)?;
        }
        let ttl = chrono::Duration::from_std(self.config.session_ttl).unwrap_or(chrono::Duration::MAX);
        self.repo.delete_sessions_idle_before(now - ttl)?;
        Ok(expired.len())
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }
}
