//! Downloading source photos and storing them resized to fit 800x600.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use image::{imageops::FilterType, ImageFormat};
use rayon::prelude::*;
use thiserror::Error;

use super::{Asset, ImageRecord};

pub const MAX_WIDTH: u32 = 800;
pub const MAX_HEIGHT: u32 = 600;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("fetch failed: {0}")]
    FetchFailed(String),
    #[error("decode failed: {0}")]
    DecodeFailed(String),
    #[error("write failed: {0}")]
    WriteFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchFailure {
    pub img_id: String,
    pub error: FetchError,
}

/// Source of raw image bytes.
pub trait Fetcher: Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

/// Fetches `http(s)://` over the network and `file://` from disk.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| FetchError::FetchFailed(e.to_string()))?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let parsed = url::Url::parse(url).map_err(|e| FetchError::FetchFailed(e.to_string()))?;
        if parsed.scheme() == "file" {
            let path = parsed
                .to_file_path()
                .map_err(|_| FetchError::FetchFailed(format!("not a local path: {url}")))?;
            return fs::read(&path).map_err(|e| FetchError::FetchFailed(format!("{}: {e}", path.display())));
        }
        let resp = self
            .client
            .get(parsed)
            .send()
            .map_err(|e| FetchError::FetchFailed(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(FetchError::FetchFailed(format!("HTTP {}", resp.status())));
        }
        resp.bytes()
            .map(|b| b.to_vec())
            .map_err(|e| FetchError::FetchFailed(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ResizeOptions {
    pub max_width: u32,
    pub max_height: u32,
    pub dest: PathBuf,
}

impl ResizeOptions {
    pub fn new(dest: impl Into<PathBuf>) -> Self {
        ResizeOptions {
            max_width: MAX_WIDTH,
            max_height: MAX_HEIGHT,
            dest: dest.into(),
        }
    }
}

/// Largest size with the source aspect ratio that fits the bounds. Never
/// upscales.
pub fn fit_within(width: u32, height: u32, max_width: u32, max_height: u32) -> (u32, u32) {
    if width <= max_width && height <= max_height {
        return (width, height);
    }
    let (w, h) = (width as u64, height as u64);
    let (mw, mh) = (max_width as u64, max_height as u64);
    let round_div = |n: u64, d: u64| ((2 * n + d) / (2 * d)).max(1);
    if w * mh >= h * mw {
        (max_width, round_div(h * mw, w).min(mh) as u32)
    } else {
        (round_div(w * mh, h).min(mw) as u32, max_height)
    }
}

/// Injective, filesystem- and URL-safe encoding of an image id. ASCII
/// alphanumerics, `-` and `.` pass through; every other byte becomes `_XX`.
pub fn asset_key(img_id: &str) -> String {
    let mut out = String::with_capacity(img_id.len());
    for b in img_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'.' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_{b:02X}"));
        }
    }
    // A bare "." or ".." would be a directory reference.
    if out.bytes().all(|b| b == b'.') {
        out = out.replace('.', "_2E");
    }
    out
}

pub fn asset_file_name(img_id: &str) -> String {
    format!("{}.jpg", asset_key(img_id))
}

/// Download, decode, shrink to fit and store one record's image as JPEG.
pub fn fetch_and_resize(
    record: &ImageRecord,
    opts: &ResizeOptions,
    fetcher: &dyn Fetcher,
) -> Result<ImageRecord, FetchError> {
    let bytes = fetcher.fetch(&record.url)?;
    let img = image::load_from_memory(&bytes).map_err(|e| FetchError::DecodeFailed(e.to_string()))?;
    let (w, h) = fit_within(img.width(), img.height(), opts.max_width, opts.max_height);
    let resized = if (w, h) == (img.width(), img.height()) {
        img
    } else {
        img.resize_exact(w, h, FilterType::Lanczos3)
    };

    let path = opts.dest.join(asset_file_name(&record.img_id));
    write_jpeg(&path, &resized.to_rgb8()).map_err(|e| FetchError::WriteFailed(format!("{}: {e}", path.display())))?;

    let mut out = record.clone();
    out.asset = Some(Asset {
        path,
        width: w,
        height: h,
    });
    Ok(out)
}

fn write_jpeg(path: &Path, img: &image::RgbImage) -> Result<(), Box<dyn std::error::Error>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Jpeg)?;
    let dir = path.parent().ok_or("no parent directory")?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(buf.get_ref())?;
    tmp.persist(path)?;
    Ok(())
}

/// Fetch every record on `workers` threads. Output order follows input
/// order; failed records come back unchanged and are listed separately.
pub fn fetch_all(
    records: &[ImageRecord],
    opts: &ResizeOptions,
    fetcher: &dyn Fetcher,
    workers: usize,
) -> (Vec<ImageRecord>, Vec<FetchFailure>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<ImageRecord, FetchError>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| fetch_and_resize(r, opts, fetcher))
            .collect()
    });

    let mut out = Vec::with_capacity(records.len());
    let mut failures = Vec::new();
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(r) => out.push(r),
            Err(error) => {
                tracing::warn!(img_id = %record.img_id, %error, "asset fetch failed");
                failures.push(FetchFailure {
                    img_id: record.img_id.clone(),
                    error,
                });
                out.push(record.clone());
            }
        }
    }
    (out, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_support::record;
    use proptest::prelude::*;
    use std::collections::HashMap;

    struct MapFetcher(HashMap<String, Vec<u8>>);

    impl Fetcher for MapFetcher {
        fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
            self.0
                .get(url)
                .cloned()
                .ok_or_else(|| FetchError::FetchFailed(format!("404 {url}")))
        }
    }

    fn png(w: u32, h: u32) -> Vec<u8> {
        let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 128]));
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).unwrap();
        buf.into_inner()
    }

    #[test]
    fn fit_examples() {
        assert_eq!(fit_within(1600, 1200, 800, 600), (800, 600));
        assert_eq!(fit_within(640, 480, 800, 600), (640, 480));
        assert_eq!(fit_within(1000, 1000, 800, 600), (600, 600));
        assert_eq!(fit_within(4000, 10, 800, 600), (800, 2));
        assert_eq!(fit_within(10_000, 1, 800, 600), (800, 1));
    }

    proptest! {
        #[test]
        fn fit_never_exceeds_bounds_and_keeps_aspect(w in 1u32..8000, h in 1u32..8000) {
            let (nw, nh) = fit_within(w, h, 800, 600);
            prop_assert!(nw <= 800 && nh <= 600);
            prop_assert!(nw <= w && nh <= h);
            // Aspect preserved within one pixel of the exact scaled size.
            let scale = (800.0 / w as f64).min(600.0 / h as f64).min(1.0);
            prop_assert!((nw as f64 - w as f64 * scale).abs() <= 1.0);
            prop_assert!((nh as f64 - h as f64 * scale).abs() <= 1.0);
        }

        #[test]
        fn asset_key_is_injective_and_safe(a in "\\PC{0,12}", b in "\\PC{0,12}") {
            let (ka, kb) = (asset_key(&a), asset_key(&b));
            prop_assert!(ka.bytes().all(|c| c.is_ascii_alphanumeric() || b"-._".contains(&c)));
            if a != b {
                prop_assert_ne!(ka, kb);
            }
        }
    }

    #[test]
    fn asset_key_examples() {
        assert_eq!(asset_key("10203/xyz"), "10203_2Fxyz");
        assert_eq!(asset_key("a_b"), "a_5Fb");
        assert_eq!(asset_key(".."), "_2E_2E");
        assert_eq!(asset_file_name("img-1.2"), "img-1.2.jpg");
    }

    #[test]
    fn large_source_is_shrunk_small_source_kept() {
        let dir = tempfile::tempdir().unwrap();
        let mut big = record("big", 1950);
        big.url = "mem://big".into();
        let mut small = record("small", 1951);
        small.url = "mem://small".into();
        let fetcher = MapFetcher(HashMap::from([
            ("mem://big".to_string(), png(1600, 1200)),
            ("mem://small".to_string(), png(640, 480)),
        ]));
        let opts = ResizeOptions::new(dir.path());

        let out = fetch_and_resize(&big, &opts, &fetcher).unwrap();
        let asset = out.asset.unwrap();
        assert_eq!((asset.width, asset.height), (800, 600));
        assert_eq!(image::image_dimensions(&asset.path).unwrap(), (800, 600));
        assert_eq!(asset.path, dir.path().join("big.jpg"));

        let out = fetch_and_resize(&small, &opts, &fetcher).unwrap();
        assert_eq!(image::image_dimensions(out.asset.unwrap().path).unwrap(), (640, 480));
    }

    #[test]
    fn failures_are_collected_in_input_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut ok = record("ok", 1950);
        ok.url = "mem://ok".into();
        let mut dead = record("dead", 1950);
        dead.url = "mem://dead".into();
        let mut garbage = record("garbage", 1950);
        garbage.url = "mem://garbage".into();
        let fetcher = MapFetcher(HashMap::from([
            ("mem://ok".to_string(), png(20, 10)),
            ("mem://garbage".to_string(), b"not an image".to_vec()),
        ]));
        let input = vec![dead.clone(), ok.clone(), garbage.clone()];
        let (out, failures) = fetch_all(&input, &ResizeOptions::new(dir.path()), &fetcher, 3);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0], dead);
        assert!(out[1].asset.is_some());
        assert_eq!(out[2], garbage);
        assert_eq!(failures.len(), 2);
        assert_eq!(failures[0].img_id, "dead");
        assert!(matches!(failures[0].error, FetchError::FetchFailed(_)));
        assert_eq!(failures[1].img_id, "garbage");
        assert!(matches!(failures[1].error, FetchError::DecodeFailed(_)));
    }

    #[test]
    fn unwritable_destination_is_write_failure() {
        let mut r = record("x", 1950);
        r.url = "mem://x".into();
        let fetcher = MapFetcher(HashMap::from([("mem://x".to_string(), png(4, 4))]));
        let err = fetch_and_resize(&r, &ResizeOptions::new("/nonexistent/dir/for/sure"), &fetcher).unwrap_err();
        assert!(matches!(err, FetchError::WriteFailed(_)));
    }

    #[test]
    fn http_fetcher_reads_files_and_reports_dead_urls() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.png");
        std::fs::write(&src, png(8, 6)).unwrap();
        let fetcher = HttpFetcher::new(Duration::from_secs(2)).unwrap();
        let url = url::Url::from_file_path(&src).unwrap();
        assert_eq!(fetcher.fetch(url.as_str()).unwrap(), std::fs::read(&src).unwrap());
        assert!(matches!(
            fetcher.fetch("http://127.0.0.1:9/missing.jpg"),
            Err(FetchError::FetchFailed(_))
        ));
    }
}
