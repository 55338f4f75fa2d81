//! Time sources. Production uses the wall clock; simulations use a clock
//! that advances by a fixed step on every read, so replays are byte-identical.

use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Returns `start`, `start + step`, `start + 2*step`, ... on successive reads.
#[derive(Debug)]
pub struct SteppingClock {
    next_micros: AtomicI64,
    step_micros: i64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: chrono::Duration) -> Self {
        SteppingClock {
            next_micros: AtomicI64::new(start.timestamp_micros()),
            step_micros: step.num_microseconds().expect("step fits in microseconds"),
        }
    }

    /// 2025-01-20T00:00:00Z, one second per read.
    pub fn fixed_default() -> Self {
        let start = Utc.with_ymd_and_hms(2025, 1, 20, 0, 0, 0).unwrap();
        SteppingClock::new(start, chrono::Duration::seconds(1))
    }

    /// Move the clock forward without producing a reading.
    pub fn advance(&self, by: chrono::Duration) {
        self.next_micros
            .fetch_add(by.num_microseconds().unwrap_or(i64::MAX), Ordering::SeqCst);
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let micros = self.next_micros.fetch_add(self.step_micros, Ordering::SeqCst);
        DateTime::from_timestamp_micros(micros).expect("clock within chrono range")
    }
}
