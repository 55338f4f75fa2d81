#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use photoyear_core::catalog::YearSource;
use photoyear_core::persistence::{CredentialHasher, HashCost};
use photoyear_core::{Catalog, Engine, EngineConfig, ImageRecord, Repository, SqliteRepository, SteppingClock, Year};
use photoyear_server::{router, AppState};
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub fn record(id: &str, year: u16) -> ImageRecord {
    ImageRecord {
        img_id: id.to_owned(),
        gt_year: Year::new(year as i64).unwrap(),
        year_source: YearSource::GroundTruth,
        date_taken: format!("{year}-03-01 10:00:00"),
        date_granularity: 0,
        url: format!("https://example.org/{id}.jpg"),
        title: Some(format!("Scene {id}")),
        asset: None,
    }
}

/// Two images per year, ids like `s44a` and `s44b`.
pub fn catalog() -> Catalog {
    Catalog::from_records(Year::all().flat_map(|y| {
        let yy = y.get() - 1900;
        [record(&format!("s{yy}a"), y.get()), record(&format!("s{yy}b"), y.get())]
    }))
    .unwrap()
}

pub fn memory_repo() -> Arc<SqliteRepository> {
    Arc::new(SqliteRepository::open_in_memory(CredentialHasher::new(HashCost::TESTING).unwrap()).unwrap())
}

pub fn engine_with(repo: Arc<dyn Repository>, config: EngineConfig) -> Arc<Engine> {
    let config = EngineConfig {
        seed: Some(7),
        ..config
    };
    Arc::new(Engine::new(catalog(), repo, Arc::new(SteppingClock::fixed_default()), config).unwrap())
}

pub fn write_jpeg(path: &Path) {
    let img = image::RgbImage::from_fn(8, 6, |x, y| image::Rgb([x as u8 * 30, y as u8 * 40, 120]));
    img.save_with_format(path, image::ImageFormat::Jpeg).unwrap();
}

pub struct App {
    pub router: Router,
    pub engine: Arc<Engine>,
    pub repo: Arc<SqliteRepository>,
    pub images: TempDir,
}

pub fn app_with(config: EngineConfig) -> App {
    let repo = memory_repo();
    let engine = engine_with(repo.clone(), config);
    let images = tempfile::tempdir().unwrap();
    let router = router(AppState::ready(engine.clone(), images.path()), None);
    App {
        router,
        engine,
        repo,
        images,
    }
}

pub fn app() -> App {
    app_with(EngineConfig::default())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"].as_str().expect("error body").to_owned()
    }
}

pub async fn send(router: &Router, req: Request<Body>) -> Reply {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    Reply { status, headers, bytes }
}

pub async fn call(router: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_owned())),
        None => req.body(Body::empty()),
    };
    send(router, req.unwrap()).await
}

pub async fn get(router: &Router, uri: &str, token: Option<&str>) -> Reply {
    call(router, Method::GET, uri, token, None).await
}

pub async fn post(router: &Router, uri: &str, token: Option<&str>, body: &str) -> Reply {
    call(router, Method::POST, uri, token, Some(body)).await
}

pub async fn demo_token(router: &Router) -> String {
    let r = post(router, "/api/demo", None, "").await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    r.json()["token"].as_str().unwrap().to_owned()
}

pub async fn user_token(router: &Router, name: &str) -> String {
    let body = format!(r#"{{"username":"{name}","password":"correct horse","age_bracket":"19-25"}}"#);
    let r = post(router, "/api/register", None, &body).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let r = post(router, "/api/login", None, &format!(r#"{{"username":"{name}","password":"correct horse"}}"#)).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    r.json()["token"].as_str().unwrap().to_owned()
}

/// Year of the image behind a served `/images/<key>` URL.
pub fn year_behind(engine: &Engine, url: &str) -> u16 {
    let key = url.strip_prefix("/images/").expect("image url");
    engine.catalog().get_by_asset_key(key).expect("known key").gt_year.get()
}

pub fn alnum_tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty())
}
