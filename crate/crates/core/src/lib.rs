//! Core of the photo-dating game: pure scoring rules, catalog ingestion,
//! round generation and submission, durable storage, and gameplay analytics.
//!
//! The HTTP service and the operator CLI live in sibling crates and only
//! talk to the types re-exported here.

pub mod analytics;
pub mod catalog;
pub mod clock;
pub mod engine;
pub mod fixed;
pub mod persistence;
pub mod scoring;
pub mod year;

pub use catalog::{Catalog, ImageRecord, IngestReport, LoadOptions};
pub use clock::{Clock, SteppingClock, SystemClock};
pub use engine::{Engine, EngineConfig, EngineError, GamePlay, Identity, PlayInput, PlayMode};
pub use fixed::{Fixed, Hundredths, Tenths};
pub use persistence::{AgeBracket, Repository, SqliteRepository, StoreError, UserAccount};
pub use scoring::{Points, TimelineChoice, TimelineOutcome};
pub use year::{Year, YearGap, YearGuess, YearOutOfRange};
