use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row};

use super::{
    username_key, AgeBracket, CredentialHasher, LeaderboardEntry, PlayFilter, PointKind, Repository,
    SessionRecord, StoreError, UserAccount, UserId,
};
use crate::catalog::{Asset, ImageRecord, YearSource};
use crate::engine::{AbandonedRound, GamePlay, Identity, PlayInput, PlayMode};
use crate::fixed::Hundredths;
use crate::scoring::TimelineChoice;
use crate::year::{Year, YearGuess};

/// Ordered schema migrations; `PRAGMA user_version` records how many ran.
const MIGRATIONS: &[&str] = &[include_str!("migrations/0001_init.sql")];
pub const SCHEMA_VERSION: u32 = MIGRATIONS.len() as u32;

/// Embedded SQLite store. One connection behind a mutex gives every reader
/// a consistent snapshot and serialises writers.
pub struct SqliteRepository {
    conn: Mutex<Connection>,
    hasher: CredentialHasher,
    location: Option<PathBuf>,
}

impl std::fmt::Debug for SqliteRepository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteRepository")
            .field("location", &self.location)
            .finish_non_exhaustive()
    }
}

impl SqliteRepository {
    pub fn open(path: impl AsRef<Path>, hasher: CredentialHasher) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let conn = Connection::open(path).map_err(backend)?;
        Self::init(conn, hasher, Some(path.to_owned()))
    }

    pub fn open_in_memory(hasher: CredentialHasher) -> Result<Self, StoreError> {
        let conn = Connection::open_in_memory().map_err(backend)?;
        Self::init(conn, hasher, None)
    }

    /// Accepts `sqlite://<path>`, `sqlite::memory:`, `:memory:` or a bare path.
    pub fn open_url(url: &str, hasher: CredentialHasher) -> Result<Self, StoreError> {
        let rest = url.strip_prefix("sqlite://").or_else(|| url.strip_prefix("sqlite:")).unwrap_or(url);
        if rest == ":memory:" {
            Self::open_in_memory(hasher)
        } else {
            Self::open(rest, hasher)
        }
    }

    fn init(conn: Connection, hasher: CredentialHasher, location: Option<PathBuf>) -> Result<Self, StoreError> {
        conn.execute_batch(
            "PRAGMA foreign_keys = ON;
             PRAGMA synchronous = FULL;
             PRAGMA busy_timeout = 5000;",
        )
        .map_err(backend)?;
        if location.is_some() {
            conn.query_row("PRAGMA journal_mode = WAL", [], |_| Ok(())).map_err(backend)?;
        }
        let repo = SqliteRepository {
            conn: Mutex::new(conn),
            hasher,
            location,
        };
        repo.migrate()?;
        Ok(repo)
    }

    /// Apply outstanding migrations. Returns the resulting schema version.
    pub fn migrate(&self) -> Result<u32, StoreError> {
        let mut conn = self.lock()?;
        let current: u32 = conn
            .query_row("PRAGMA user_version", [], |r| r.get(0))
            .map_err(backend)?;
        if current > SCHEMA_VERSION {
            return Err(StoreError::Corrupt(format!(
                "database schema version {current} is newer than this build ({SCHEMA_VERSION})"
            )));
        }
        for (i, sql) in MIGRATIONS.iter().enumerate().skip(current as usize) {
            let tx = conn.transaction().map_err(backend)?;
            tx.execute_batch(sql).map_err(backend)?;
            tx.pragma_update(None, "user_version", (i + 1) as u32).map_err(backend)?;
            tx.commit().map_err(backend)?;
            tracing::info!(version = i + 1, "applied schema migration");
        }
        Ok(SCHEMA_VERSION)
    }

    pub fn schema_version(&self) -> Result<u32, StoreError> {
        self.lock()?
            .query_row("PRAGMA user_version", [], |r| r.get(0))
            .map_err(backend)
    }

    fn lock(&self) -> Result<MutexGuard<'_, Connection>, StoreError> {
        self.conn
            .lock()
            .map_err(|_| StoreError::Backend("connection mutex poisoned".into()))
    }
}

fn backend(e: rusqlite::Error) -> StoreError {
    StoreError::Backend(e.to_string())
}

fn constraint(e: rusqlite::Error) -> StoreError {
    if let rusqlite::Error::SqliteFailure(err, _) = &e {
        match err.extended_code {
            rusqlite::ffi::SQLITE_CONSTRAINT_FOREIGNKEY => return StoreError::ForeignKeyViolation,
            rusqlite::ffi::SQLITE_CONSTRAINT_UNIQUE | rusqlite::ffi::SQLITE_CONSTRAINT_PRIMARYKEY => {
                return StoreError::UsernameTaken
            }
            _ => {}
        }
    }
    backend(e)
}

fn ts(t: &DateTime<Utc>) -> String {
    // Fixed width, so text order equals time order.
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn parse_ts(s: &str) -> Result<DateTime<Utc>, StoreError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp {s:?}: {e}")))
}

fn corrupt<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> StoreError + '_ {
    move |e| StoreError::Corrupt(format!("{what}: {e}"))
}

fn identity_of(user_id: Option<i64>) -> Identity {
    user_id.map_or(Identity::Demo, |id| Identity::User(UserId(id)))
}

struct RawUser {
    user_id: i64,
    username: String,
    credential_hash: String,
    age_bracket: Option<String>,
    created_at: String,
}

impl RawUser {
    const COLUMNS: &'static str = "user_id, username, credential_hash, age_bracket, created_at";

    fn from_row(r: &Row<'_>) -> rusqlite::Result<Self> {
        Ok(RawUser {
            user_id: r.get(0)?,
            username: r.get(1)?,
            credential_hash: r.get(2)?,
            age_bracket: r.get(3)?,
            created_at: r.get(4)?,
        })
    }

    fn into_account(self) -> Result<UserAccount, StoreError> {
        Ok(UserAccount {
            user_id: UserId(self.user_id),
            username: self.username,
            credential_hash: self.credential_hash,
            age_bracket: self.age_bracket.as_deref().map(str::parse).transpose()?,
            created_at: parse_ts(&self.created_at)?,
        })
    }
}

struct RawPlay {
    play_id: i64,
    mode: String,
    user_id: Option<i64>,
    session_id: String,
    image_id: String,
    second_image_id: Option<String>,
    guess_year: Option<i64>,
    choice: Option<String>,
    correct: bool,
    static_points: u32,
    dynamic_hundredths: i64,
    played_at: String,
}

impl RawPlay {
    const COLUMNS: &'static str = "play_id, mode, user_id, session_id, image_id, second_image_id, \
         guess_year, choice, correct, static_points, dynamic_hundredths, played_at";

    fn from_row(r: &Row<'_>) -> rusqlite::Result<Self> {
        Ok(RawPlay {
            play_id: r.get(0)?,
            mode: r.get(1)?,
            user_id: r.get(2)?,
            session_id: r.get(3)?,
            image_id: r.get(4)?,
            second_image_id: r.get(5)?,
            guess_year: r.get(6)?,
            choice: r.get(7)?,
            correct: r.get(8)?,
            static_points: r.get(9)?,
            dynamic_hundredths: r.get(10)?,
            played_at: r.get(11)?,
        })
    }

    fn into_play(self) -> Result<GamePlay, StoreError> {
        let bad = |what: &str| StoreError::Corrupt(format!("play {}: {what}", self.play_id));
        let input = match PlayMode::parse(&self.mode).ok_or_else(|| bad("mode"))? {
            PlayMode::GuessYear => PlayInput::GuessYear {
                img_id: self.image_id.clone(),
                guess: YearGuess::new(self.guess_year.ok_or_else(|| bad("guess_year"))?)
                    .map_err(corrupt("guess_year"))?,
            },
            PlayMode::Timeline => PlayInput::Timeline {
                left_id: self.image_id.clone(),
                right_id: self.second_image_id.clone().ok_or_else(|| bad("second_image_id"))?,
                choice: self
                    .choice
                    .as_deref()
                    .and_then(TimelineChoice::parse)
                    .ok_or_else(|| bad("choice"))?,
            },
        };
        Ok(GamePlay {
            play_id: Some(self.play_id),
            identity: identity_of(self.user_id),
            session_id: self.session_id,
            input,
            correct: self.correct,
            static_points: self.static_points,
            dynamic_points: Hundredths::from_units(self.dynamic_hundredths),
            played_at: parse_ts(&self.played_at)?,
        })
    }
}

/// WHERE clause plus bound values for a [`PlayFilter`] against a table
/// with `user_id`, `session_id` and the given time column.
fn filter_clause(filter: &PlayFilter, time_col: &str) -> (String, Vec<rusqlite::types::Value>) {
    use rusqlite::types::Value;
    let mut clauses = Vec::new();
    let mut values = Vec::new();
    if !filter.include_demo {
        clauses.push("user_id IS NOT NULL".to_owned());
    }
    if let Some(user) = filter.user {
        clauses.push("user_id = ?".to_owned());
        values.push(Value::Integer(user.0));
    }
    if let Some(session) = &filter.session_id {
        clauses.push("session_id = ?".to_owned());
        values.push(Value::Text(session.clone()));
    }
    if let Some(from) = &filter.from {
        clauses.push(format!("{time_col} >= ?"));
        values.push(Value::Text(ts(from)));
    }
    if let Some(to) = &filter.to {
        clauses.push(format!("{time_col} <= ?"));
        values.push(Value::Text(ts(to)));
    }
    let sql = if clauses.is_empty() {
        String::new()
    } else {
        format!(" WHERE {}", clauses.join(" AND "))
    };
    (sql, values)
}

impl Repository for SqliteRepository {
    fn credentials(&self) -> &CredentialHasher {
        &self.hasher
    }

    fn insert_user(
        &self,
        username: &str,
        credential_hash: &str,
        age_bracket: Option<AgeBracket>,
        created_at: DateTime<Utc>,
    ) -> Result<UserAccount, StoreError> {
        let conn = self.lock()?;
        conn.execute(
            "INSERT INTO users (username, username_key, credential_hash, age_bracket, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                username,
                username_key(username),
                credential_hash,
                age_bracket.map(AgeBracket::as_str),
                ts(&created_at)
            ],
        )
        .map_err(constraint)?;
        Ok(UserAccount {
            user_id: UserId(conn.last_insert_rowid()),
            username: username.to_owned(),
            credential_hash: credential_hash.to_owned(),
            age_bracket,
            created_at,
        })
    }

    fn user_by_name(&self, username: &str) -> Result<Option<UserAccount>, StoreError> {
        let conn = self.lock()?;
        conn.query_row(
            &format!("SELECT {} FROM users WHERE username_key = ?1", RawUser::COLUMNS),
            [username_key(username)],
            RawUser::from_row,
        )
        .optional()
        .map_err(backend)?
        .map(RawUser::into_account)
        .transpose()
    }

    fn user(&self, id: UserId) -> Result<Option<UserAccount>, StoreError> {
        let conn = self.lock()?;
        conn.query_row(
            &format!("SELECT {} FROM users WHERE user_id = ?1", RawUser::COLUMNS),
            [id.0],
            RawUser::from_row,
        )
        .optional()
        .map_err(backend)?
        .map(RawUser::into_account)
        .transpose()
    }

    fn users(&self) -> Result<Vec<UserAccount>, StoreError> {
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare(&format!("SELECT {} FROM users ORDER BY user_id", RawUser::COLUMNS))
            .map_err(backend)?;
        let rows = stmt
            .query_map([], RawUser::from_row)
            .map_err(backend)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(backend)?;
        rows.into_iter().map(RawUser::into_account).collect()
    }

    fn upsert_images(&self, records: &[ImageRecord]) -> Result<(), StoreError> {
        let mut conn = self.lock()?;
        let tx = conn.transaction().map_err(backend)?;
        {
            let mut stmt = tx
                .prepare(
                    "INSERT INTO images (img_id, gt_year, needs_review, date_taken, date_granularity,
                                         url, title, asset_path, width, height)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)
                     ON CONFLICT (img_id) DO UPDATE SET
                         gt_year = excluded.gt_year, needs_review = excluded.needs_review,
                         date_taken = excluded.date_taken, date_granularity = excluded.date_granularity,
                         url = excluded.url, title = excluded.title, asset_path = excluded.asset_path,
                         width = excluded.width, height = excluded.height",
                )
                .map_err(backend)?;
            for r in records {
                let asset = r.asset.as_ref();
                stmt.execute(params![
                    r.img_id,
                    r.gt_year.get(),
                    r.needs_review(),
                    r.date_taken,
                    r.date_granularity,
                    r.url,
                    r.title,
                    asset.map(|a| a.path.to_string_lossy().into_owned()),
                    asset.map(|a| a.width),
                    asset.map(|a| a.height),
                ])
                .map_err(backend)?;
            }
        }
        tx.commit().map_err(backend)
    }

    fn images(&self) -> Result<Vec<ImageRecord>, StoreError> {
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare(
                "SELECT img_id, gt_year, needs_review, date_taken, date_granularity, url, title,
                        asset_path, width, height
                 FROM images ORDER BY img_id",
            )
            .map_err(backend)?;
        type Raw = (String, i64, bool, String, u32, String, Option<String>, Option<String>, Option<u32>, Option<u32>);
        let rows: Vec<Raw> = stmt
            .query_map([], |r| {
                Ok((
                    r.get(0)?,
                    r.get(1)?,
                    r.get(2)?,
                    r.get(3)?,
                    r.get(4)?,
                    r.get(5)?,
                    r.get(6)?,
                    r.get(7)?,
                    r.get(8)?,
                    r.get(9)?,
                ))
            })
            .map_err(backend)?
            .collect::<Result<_, _>>()
            .map_err(backend)?;
        rows.into_iter()
            .map(|(img_id, year, review, date_taken, gran, url, title, path, w, h)| {
                Ok(ImageRecord {
                    gt_year: Year::new(year).map_err(corrupt("gt_year"))?,
                    year_source: if review { YearSource::DateTaken } else { YearSource::GroundTruth },
                    img_id,
                    date_taken,
                    date_granularity: gran,
                    url,
                    title,
                    asset: match (path, w, h) {
                        (Some(path), Some(width), Some(height)) => Some(Asset {
                            path: path.into(),
                            width,
                            height,
                        }),
                        _ => None,
                    },
                })
            })
            .collect()
    }

    fn record_play(&self, play: &GamePlay) -> Result<i64, StoreError> {
        let (image_id, second_image_id, guess_year, choice) = match &play.input {
            PlayInput::GuessYear { img_id, guess } => (img_id.as_str(), None, Some(guess.get()), None),
            PlayInput::Timeline {
                left_id,
                right_id,
                choice,
            } => (left_id.as_str(), Some(right_id.as_str()), None, Some(choice.as_str())),
        };
        let conn = self.lock()?;
        conn.execute(
            "INSERT INTO game_plays (mode, user_id, is_demo, session_id, image_id, second_image_id,
                                     guess_year, choice, correct, static_points, dynamic_hundredths, played_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)",
            params![
                play.mode().as_str(),
                play.identity.user_id().map(|u| u.0),
                play.identity.is_demo(),
                play.session_id,
                image_id,
                second_image_id,
                guess_year,
                choice,
                play.correct,
                play.static_points,
                play.dynamic_points.units(),
                ts(&play.played_at),
            ],
        )
        .map_err(constraint)?;
        Ok(conn.last_insert_rowid())
    }

    fn plays(&self, filter: &PlayFilter) -> Result<Vec<GamePlay>, StoreError> {
        let (clause, values) = filter_clause(filter, "played_at");
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare(&format!(
                "SELECT {} FROM game_plays{clause} ORDER BY play_id",
                RawPlay::COLUMNS
            ))
            .map_err(backend)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(values), RawPlay::from_row)
            .map_err(backend)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(backend)?;
        rows.into_iter().map(RawPlay::into_play).collect()
    }

    fn record_abandoned(&self, round: &AbandonedRound) -> Result<(), StoreError> {
        let conn = self.lock()?;
        conn.execute(
            "INSERT INTO abandoned_rounds (session_id, user_id, mode, image_id, second_image_id, served_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                round.session_id,
                round.identity.user_id().map(|u| u.0),
                round.mode.as_str(),
                round.image_ids.first().map(String::as_str).unwrap_or_default(),
                round.image_ids.get(1),
                ts(&round.served_at),
            ],
        )
        .map_err(constraint)?;
        Ok(())
    }

    fn abandoned_rounds(&self, filter: &PlayFilter) -> Result<Vec<AbandonedRound>, StoreError> {
        let (clause, values) = filter_clause(filter, "served_at");
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare(&format!(
                "SELECT session_id, user_id, mode, image_id, second_image_id, served_at
                 FROM abandoned_rounds{clause} ORDER BY id"
            ))
            .map_err(backend)?;
        type Raw = (String, Option<i64>, String, String, Option<String>, String);
        let rows: Vec<Raw> = stmt
            .query_map(rusqlite::params_from_iter(values), |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?))
            })
            .map_err(backend)?
            .collect::<Result<_, _>>()
            .map_err(backend)?;
        rows.into_iter()
            .map(|(session_id, user_id, mode, first, second, served_at)| {
                Ok(AbandonedRound {
                    session_id,
                    identity: identity_of(user_id),
                    mode: PlayMode::parse(&mode).ok_or_else(|| StoreError::Corrupt(format!("mode {mode:?}")))?,
                    image_ids: std::iter::once(first).chain(second).collect(),
                    served_at: parse_ts(&served_at)?,
                })
            })
            .collect()
    }

    fn leaderboard(&self, kind: PointKind, limit: u32) -> Result<Vec<LeaderboardEntry>, StoreError> {
        let order = match kind {
            PointKind::Static => "total_static DESC",
            PointKind::Dynamic => "total_dynamic DESC",
        };
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare(&format!(
                "SELECT u.username,
                        COALESCE(SUM(p.static_points), 0) AS total_static,
                        COALESCE(SUM(p.dynamic_hundredths), 0) AS total_dynamic,
                        MIN(p.played_at) AS first_play
                 FROM users u
                 LEFT JOIN game_plays p ON p.user_id = u.user_id
                 GROUP BY u.user_id
                 ORDER BY {order}, first_play IS NULL, first_play ASC, u.username_key ASC, u.username ASC
                 LIMIT ?1"
            ))
            .map_err(backend)?;
        let rows = stmt
            .query_map([limit], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?, r.get::<_, i64>(2)?))
            })
            .map_err(backend)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(backend)?;
        Ok(rows
            .into_iter()
            .enumerate()
            .map(|(i, (username, total_static, total_dynamic))| LeaderboardEntry {
                rank: i as u32 + 1,
                username,
                total_static,
                total_dynamic: Hundredths::from_units(total_dynamic),
            })
            .collect())
    }

    fn save_session(&self, session: &SessionRecord) -> Result<(), StoreError> {
        let conn = self.lock()?;
        conn.execute(
            "INSERT INTO sessions (session_id, token_digest, user_id, created_at, last_seen_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                session.session_id,
                session.token_digest,
                session.identity.user_id().map(|u| u.0),
                ts(&session.created_at),
                ts(&session.last_seen_at),
            ],
        )
        .map_err(|e| match constraint(e) {
            StoreError::UsernameTaken => StoreError::Backend("session id collision".into()),
            other => other,
        })?;
        Ok(())
    }

    fn session_by_token_digest(&self, digest: &str) -> Result<Option<SessionRecord>, StoreError> {
        let conn = self.lock()?;
        let raw = conn
            .query_row(
                "SELECT session_id, token_digest, user_id, created_at, last_seen_at
                 FROM sessions WHERE token_digest = ?1",
                [digest],
                |r| {
                    Ok((
                        r.get::<_, String>(0)?,
                        r.get::<_, String>(1)?,
                        r.get::<_, Option<i64>>(2)?,
                        r.get::<_, String>(3)?,
                        r.get::<_, String>(4)?,
                    ))
                },
            )
            .optional()
            .map_err(backend)?;
        raw.map(|(session_id, token_digest, user_id, created, seen)| {
            Ok(SessionRecord {
                session_id,
                token_digest,
                identity: identity_of(user_id),
                created_at: parse_ts(&created)?,
                last_seen_at: parse_ts(&seen)?,
            })
        })
        .transpose()
    }

    fn touch_session(&self, session_id: &str, at: DateTime<Utc>) -> Result<(), StoreError> {
        let conn = self.lock()?;
        conn.execute(
            "UPDATE sessions SET last_seen_at = ?2 WHERE session_id = ?1",
            params![session_id, ts(&at)],
        )
        .map_err(backend)?;
        Ok(())
    }

    fn delete_sessions_idle_before(&self, cutoff: DateTime<Utc>) -> Result<usize, StoreError> {
        let conn = self.lock()?;
        conn.execute("DELETE FROM sessions WHERE last_seen_at < ?1", [ts(&cutoff)])
            .map_err(backend)
    }
}
