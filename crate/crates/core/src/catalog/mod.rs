//! The image catalog: metadata records with resolved ground-truth years,
//! loaded from `meta.csv` and optionally backed by resized local assets.

mod assets;
mod meta;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::year::Year;

pub use assets::{
    asset_file_name, asset_key, fetch_all, fetch_and_resize, fit_within, FetchError, FetchFailure,
    Fetcher, HttpFetcher, ResizeOptions, MAX_HEIGHT, MAX_WIDTH,
};
pub use meta::{load_catalog, parse_meta_row, resolve_year, write_catalog, META_HEADER};

/// Where a record's year came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum YearSource {
    /// The `gt_year` column.
    GroundTruth,
    /// Recovered from `date_taken` because `gt_year` was blank; needs review.
    DateTaken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub img_id: String,
    pub gt_year: Year,
    pub year_source: YearSource,
    /// Carried verbatim from the source.
    pub date_taken: String,
    /// Opaque source code for how precise `date_taken` is.
    pub date_granularity: u32,
    pub url: String,
    pub title: Option<String>,
    pub asset: Option<Asset>,
}

impl ImageRecord {
    pub fn needs_review(&self) -> bool {
        self.year_source == YearSource::DateTaken
    }

    /// Stable, filesystem- and URL-safe key for this image.
    pub fn asset_key(&self) -> String {
        asset_key(&self.img_id)
    }
}

/// Why a metadata row was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RowRejection {
    #[error("expected 5 or 6 fields, found {found}")]
    FieldCount { found: usize },
    #[error("missing mandatory field {0}")]
    MissingField(&'static str),
    #[error("gt_year {0:?} is not an integer")]
    NonIntegerYear(String),
    #[error("year {0} outside 1930..=1999")]
    YearOutOfRange(i64),
    #[error("no usable year in gt_year or date_taken {0:?}")]
    UnresolvableYear(String),
    #[error("date_granularity {0:?} is not a non-negative integer")]
    BadGranularity(String),
    #[error("bad url {0:?}")]
    BadUrl(String),
    #[error("duplicate img_id {0:?}")]
    DuplicateId(String),
    #[error("undecodable row: {0}")]
    Malformed(String),
}

impl RowRejection {
    /// Machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            RowRejection::FieldCount { .. } => "FieldCount",
            RowRejection::MissingField(_) => "MissingField",
            RowRejection::NonIntegerYear(_) => "NonIntegerYear",
            RowRejection::YearOutOfRange(_) => "YearOutOfRange",
            RowRejection::UnresolvableYear(_) => "UnresolvableYear",
            RowRejection::BadGranularity(_) => "BadGranularity",
            RowRejection::BadUrl(_) => "BadUrl",
            RowRejection::DuplicateId(_) => "DuplicateId",
            RowRejection::Malformed(_) => "Malformed",
        }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unreadable metadata stream: {0}")]
    Unreadable(String),
    #[error("unexpected header {found:?}, expected {expected}")]
    BadHeader { found: Vec<String>, expected: String },
    #[error("duplicate img_id {0:?}")]
    DuplicateId(String),
    #[error("catalog is missing years {0:?}")]
    MissingYears(Vec<Year>),
    #[error("img_ids {0:?} and {1:?} map to the same asset key")]
    AssetKeyCollision(String, String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Fixture catalogs may skip years; production catalogs may not.
    pub allow_partial_years: bool,
}

/// Accounting for one ingestion run. `accepted + rejected.len()` always
/// equals `total_rows`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub total_rows: usize,
    pub accepted: usize,
    /// 1-based data row number (header excluded) and reason.
    pub rejected: Vec<(usize, RowRejection)>,
    pub missing_years: Vec<Year>,
    pub needs_review: Vec<String>,
    pub fetch_failures: Vec<FetchFailure>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty() && self.fetch_failures.is_empty()
    }
}

/// An in-memory catalog with O(1) lookup by id and by asset key.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    records: Vec<ImageRecord>,
    by_id: HashMap<String, usize>,
    by_key: HashMap<String, usize>,
    per_year: BTreeMap<Year, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ImageRecord>) -> Result<Self, CatalogError> {
        let mut catalog = Catalog::new();
        for r in records {
            catalog.push(r)?;
        }
        Ok(catalog)
    }

    pub fn push(&mut self, record: ImageRecord) -> Result<(), CatalogError> {
        if self.by_id.contains_key(&record.img_id) {
            return Err(CatalogError::DuplicateId(record.img_id));
        }
        let key = record.asset_key();
        if let Some(&other) = self.by_key.get(&key) {
            return Err(CatalogError::AssetKeyCollision(
                self.records[other].img_id.clone(),
                record.img_id,
            ));
        }
        let idx = self.records.len();
        self.by_id.insert(record.img_id.clone(), idx);
        self.by_key.insert(key, idx);
        *self.per_year.entry(record.gt_year).or_default() += 1;
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn get(&self, img_id: &str) -> Option<&ImageRecord> {
        self.by_id.get(img_id).map(|&i| &self.records[i])
    }

    pub fn get_by_asset_key(&self, key: &str) -> Option<&ImageRecord> {
        self.by_key.get(key).map(|&i| &self.records[i])
    }

    pub fn year_of(&self, img_id: &str) -> Option<Year> {
        self.get(img_id).map(|r| r.gt_year)
    }

    /// Counts for years with at least one image.
    pub fn per_year_counts(&self) -> &BTreeMap<Year, usize> {
        &self.per_year
    }

    pub fn distinct_years(&self) -> usize {
        self.per_year.len()
    }

    pub fn missing_years(&self) -> Vec<Year> {
        Year::all().filter(|y| !self.per_year.contains_key(y)).collect()
    }

    /// Fails unless every catalog year has at least one image.
    pub fn ensure_complete(&self) -> Result<(), CatalogError> {
        let missing = self.missing_years();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::MissingYears(missing))
        }
    }

    /// Keep only records satisfying `keep`.
    pub fn retain(self, mut keep: impl FnMut(&ImageRecord) -> bool) -> Catalog {
        Catalog::from_records(self.records.into_iter().filter(|r| keep(r)))
            .expect("subset of a valid catalog is valid")
    }
}

/// Per-year coverage of a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Every year of the range, zero counts included.
    pub per_year_counts: BTreeMap<Year, usize>,
    pub missing_years: Vec<Year>,
    /// Mean count over the whole year range.
    pub mean_per_year: f64,
    /// Non-empty years whose count is off the mean by more than the factor.
    pub imbalanced: Vec<(Year, usize)>,
}

impl CoverageReport {
    pub fn has_warnings(&self) -> bool {
        !self.missing_years.is_empty() || !self.imbalanced.is_empty()
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean images per year: {:.1}", self.mean_per_year)?;
        for (year, count) in &self.per_year_counts {
            writeln!(f, "{year}\t{count}")?;
        }
        if !self.missing_years.is_empty() {
            writeln!(f, "missing: {:?}", self.missing_years.iter().map(|y| y.get()).collect::<Vec<_>>())?;
        }
        for (year, count) in &self.imbalanced {
            writeln!(f, "imbalanced: {year} has {count}")?;
        }
        Ok(())
    }
}

pub const DEFAULT_IMBALANCE_FACTOR: f64 = 2.0;

/// A year is flagged when its count exceeds `mean * factor` or falls below
/// `mean / factor`. Empty years go to `missing_years` instead.
pub fn validate_catalog(catalog: &Catalog, imbalance_factor: f64) -> CoverageReport {
    assert!(imbalance_factor >= 1.0, "imbalance factor must be >= 1");
    let per_year_counts: BTreeMap<Year, usize> = Year::all()
        .map(|y| (y, catalog.per_year.get(&y).copied().unwrap_or(0)))
        .collect();
    let mean = catalog.len() as f64 / per_year_counts.len() as f64;
    let imbalanced = per_year_counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .filter(|(_, &c)| {
            let c = c as f64;
            c > mean * imbalance_factor || c < mean / imbalance_factor
        })
        .map(|(&y, &c)| (y, c))
        .collect();
    CoverageReport {
        missing_years: catalog.missing_years(),
        per_year_counts,
        mean_per_year: mean,
        imbalanced,
    }
}
