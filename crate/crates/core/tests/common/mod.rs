#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use num_rational::Ratio;
use photoyear_core::catalog::{Fetcher, FetchError, YearSource};
use photoyear_core::persistence::{CredentialHasher, HashCost};
use photoyear_core::{Catalog, Engine, EngineConfig, ImageRecord, SqliteRepository, SteppingClock, Year};

pub fn record(id: &str, year: u16) -> ImageRecord {
    ImageRecord {
        img_id: id.to_owned(),
        gt_year: Year::new(year as i64).unwrap(),
        year_source: YearSource::GroundTruth,
        date_taken: format!("{year}-06-01 12:00:00"),
        date_granularity: 0,
        url: format!("https://example.org/{id}.jpg"),
        title: Some(format!("Photo {id}")),
        asset: None,
    }
}

/// `per_year` images for every year; ids never contain a four-digit year.
pub fn balanced_catalog(per_year: usize) -> Catalog {
    Catalog::from_records(
        Year::all().flat_map(|y| (0..per_year).map(move |i| record(&format!("p{}x{i}", y.get() - 1900), y.get()))),
    )
    .unwrap()
}

pub struct Harness {
    pub engine: Arc<Engine>,
    pub repo: Arc<SqliteRepository>,
    pub clock: Arc<SteppingClock>,
}

pub fn harness(catalog: Catalog, seed: u64) -> Harness {
    let repo = Arc::new(SqliteRepository::open_in_memory(CredentialHasher::new(HashCost::TESTING).unwrap()).unwrap());
    let clock = Arc::new(SteppingClock::fixed_default());
    let config = EngineConfig {
        seed: Some(seed),
        ..EngineConfig::default()
    };
    let engine = Arc::new(Engine::new(catalog, repo.clone(), clock.clone(), config).unwrap());
    Harness { engine, repo, clock }
}

/// Round a non-negative rational half-up to hundredths, as integer units.
pub fn hundredths_half_up(x: Ratio<i64>) -> i64 {
    assert!(x >= Ratio::from_integer(0));
    (x * 100 + Ratio::new(1, 2)).floor().to_integer()
}

/// Single-image dynamic score, straight from the formula: 10 * (1 - min(|g - a|, 100) / 100).
pub fn oracle_year_dynamic(guess: i64, actual: i64) -> i64 {
    let err = (guess - actual).abs().min(100);
    let one = Ratio::from_integer(1);
    hundredths_half_up(Ratio::from_integer(10) * (one - Ratio::new(err, 100)))
}

/// Timeline bonus: 5.0 times the piecewise factor.
pub fn oracle_timeline_bonus(delta: i64) -> i64 {
    let one = Ratio::from_integer(1);
    let factor = if delta <= 10 {
        one
    } else if delta <= 50 {
        one - Ratio::new(delta - 10, 40)
    } else {
        Ratio::new(1, 10)
    };
    hundredths_half_up(Ratio::from_integer(5) * factor)
}

/// Serves fixed bytes per URL.
pub struct MapFetcher(pub HashMap<String, Vec<u8>>);

impl Fetcher for MapFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        self.0
            .get(url)
            .cloned()
            .ok_or_else(|| FetchError::FetchFailed(format!("no fixture for {url}")))
    }
}

pub fn png_bytes(width: u32, height: u32) -> Vec<u8> {
    let img = image::RgbImage::from_fn(width, height, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 90]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

/// Whole alphanumeric runs of a serialized payload.
pub fn alnum_tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty())
}
