//! Durable storage: user accounts, catalog images, sessions and the
//! gameplay log, behind the [`Repository`] trait.
//!
//! [`SqliteRepository`] is the reference backend. Totals are summed as
//! integer hundredths, never floats.

mod credentials;
mod sqlite;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ImageRecord;
use crate::engine::{AbandonedRound, GamePlay, Identity};
use crate::fixed::Hundredths;

pub use credentials::{CredentialHasher, HashCost};
pub use sqlite::{SqliteRepository, SCHEMA_VERSION};

pub const MIN_PASSWORD_LEN: usize = 8;
pub const MAX_USERNAME_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub i64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBracket {
    #[serde(rename = "14-18")]
    Teen,
    #[serde(rename = "19-25")]
    YoungAdult,
    #[serde(rename = "26-40")]
    Adult,
    #[serde(rename = "41+")]
    Senior,
}

impl AgeBracket {
    pub const ALL: [AgeBracket; 4] = [
        AgeBracket::Teen,
        AgeBracket::YoungAdult,
        AgeBracket::Adult,
        AgeBracket::Senior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBracket::Teen => "14-18",
            AgeBracket::YoungAdult => "19-25",
            AgeBracket::Adult => "26-40",
            AgeBracket::Senior => "41+",
        }
    }
}

impl FromStr for AgeBracket {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeBracket::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| StoreError::InvalidAgeBracket(s.to_owned()))
    }
}

impl fmt::Display for AgeBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A registered player. `credential_hash` is a self-describing PHC string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccount {
    pub user_id: UserId,
    pub username: String,
    pub credential_hash: String,
    pub age_bracket: Option<AgeBracket>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: u32,
    pub username: String,
    pub total_static: i64,
    pub total_dynamic: Hundredths,
}

/// Persisted session metadata. Pending rounds are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub session_id: String,
    /// SHA-256 of the bearer token, hex encoded.
    pub token_digest: String,
    pub identity: Identity,
    pub created_at: DateTime<Utc>,
    pub last_seen_at: DateTime<Utc>,
}

/// Selects plays; all bounds inclusive, `None` means unbounded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlayFilter {
    pub user: Option<UserId>,
    pub session_id: Option<String>,
    pub include_demo: bool,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl PlayFilter {
    pub fn all() -> Self {
        PlayFilter {
            include_demo: true,
            ..PlayFilter::default()
        }
    }

    pub fn registered() -> Self {
        PlayFilter::default()
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("username already taken")]
    UsernameTaken,
    #[error("password must be at least {MIN_PASSWORD_LEN} characters")]
    WeakPassword,
    #[error("username must be 1..={MAX_USERNAME_LEN} characters")]
    InvalidUsername,
    #[error("unknown age bracket {0:?}")]
    InvalidAgeBracket(String),
    /// Deliberately the same for unknown users and wrong passwords.
    #[error("authentication failed")]
    AuthFailed,
    #[error("referenced user or image does not exist")]
    ForeignKeyViolation,
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
    #[error("storage backend error: {0}")]
    Backend(String),
}

/// Storage contract. Implementations must be safe to share across threads;
/// every mutation is atomic and visible to subsequent reads.
pub trait Repository: Send + Sync {
    fn credentials(&self) -> &CredentialHasher;

    fn insert_user(
        &self,
        username: &str,
        credential_hash: &str,
        age_bracket: Option<AgeBracket>,
        created_at: DateTime<Utc>,
    ) -> Result<UserAccount, StoreError>;
    fn user_by_name(&self, username: &str) -> Result<Option<UserAccount>, StoreError>;
    fn user(&self, id: UserId) -> Result<Option<UserAccount>, StoreError>;
    fn users(&self) -> Result<Vec<UserAccount>, StoreError>;

    fn upsert_images(&self, records: &[ImageRecord]) -> Result<(), StoreError>;
    fn images(&self) -> Result<Vec<ImageRecord>, StoreError>;

    fn record_play(&self, play: &GamePlay) -> Result<i64, StoreError>;
    fn plays(&self, filter: &PlayFilter) -> Result<Vec<GamePlay>, StoreError>;
    fn record_abandoned(&self, round: &AbandonedRound) -> Result<(), StoreError>;
    fn abandoned_rounds(&self, filter: &PlayFilter) -> Result<Vec<AbandonedRound>, StoreError>;

    /// Registered users only, ordered by the requested total descending,
    /// then earliest first play, then username.
    fn leaderboard(&self, kind: PointKind, limit: u32) -> Result<Vec<LeaderboardEntry>, StoreError>;

    fn save_session(&self, session: &SessionRecord) -> Result<(), StoreError>;
    fn session_by_token_digest(&self, digest: &str) -> Result<Option<SessionRecord>, StoreError>;
    fn touch_session(&self, session_id: &str, at: DateTime<Utc>) -> Result<(), StoreError>;
    fn delete_sessions_idle_before(&self, cutoff: DateTime<Utc>) -> Result<usize, StoreError>;

    /// Validate, hash and store a new account.
    fn create_user(
        &self,
        username: &str,
        password: &str,
        age_bracket: Option<AgeBracket>,
        now: DateTime<Utc>,
    ) -> Result<UserAccount, StoreError> {
        let username = username.trim();
        if username.is_empty() || username.chars().count() > MAX_USERNAME_LEN {
            return Err(StoreError::InvalidUsername);
        }
        if password.chars().count() < MIN_PASSWORD_LEN {
            return Err(StoreError::WeakPassword);
        }
        if self.user_by_name(username)?.is_some() {
            return Err(StoreError::UsernameTaken);
        }
        let hash = self.credentials().hash(password)?;
        self.insert_user(username, &hash, age_bracket, now)
    }

    /// Unknown users are checked against a dummy hash of the same cost, so
    /// both failure paths do the same work.
    fn authenticate(&self, username: &str, password: &str) -> Result<UserAccount, StoreError> {
        let user = self.user_by_name(username.trim())?;
        let hasher = self.credentials();
        match user {
            Some(u) if hasher.verify(password, &u.credential_hash) => Ok(u),
            Some(_) => Err(StoreError::AuthFailed),
            None => {
                hasher.verify_dummy(password);
                Err(StoreError::AuthFailed)
            }
        }
    }
}

pub(crate) fn username_key(username: &str) -> String {
    username.trim().to_lowercase()
}
