use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use axum::Json;
use photoyear_core::analytics::{self, DecadeOptions, DecadeStats, ModeAccuracy};
use photoyear_core::catalog::asset_file_name;
use photoyear_core::persistence::{LeaderboardEntry, PlayFilter, PointKind};
use photoyear_core::engine::{SessionTicket, TimelineResult, TimelineRoundView, YearResult, YearRoundView};
use photoyear_core::{AgeBracket, Engine, EngineError, Identity, TimelineChoice};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::AppState;

pub const SESSION_COOKIE: &str = "photoyear_session";
const MAX_LEADERBOARD_LIMIT: u32 = 1000;

/// JSON body whose rejections become 422 with the standard error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => Err(ApiError::validation(rejection.body_text())),
        }
    }
}

/// Run engine work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, EngineError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

/// Bearer header first, then the session cookie.
pub fn session_token(headers: &HeaderMap) -> Option<String> {
    if let Some(auth) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        if let Some(token) = auth.strip_prefix("Bearer ") {
            let token = token.trim();
            if !token.is_empty() {
                return Some(token.to_owned());
            }
        }
    }
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, v)| *k == SESSION_COOKIE && !v.is_empty())
        .map(|(_, v)| v.to_owned())
}

fn require_token(headers: &HeaderMap) -> Result<String, ApiError> {
    session_token(headers).ok_or_else(ApiError::unauthenticated)
}

#[derive(Serialize)]
struct TokenBody {
    token: String,
}

fn ticket_response(ticket: SessionTicket) -> Response {
    let cookie = format!("{SESSION_COOKIE}={}; Path=/; HttpOnly; SameSite=Strict", ticket.token);
    let mut resp = Json(TokenBody { token: ticket.token }).into_response();
    if let Ok(v) = HeaderValue::from_str(&cookie) {
        resp.headers_mut().insert(header::SET_COOKIE, v);
    }
    resp
}

#[derive(Deserialize)]
pub struct RegisterBody {
    username: String,
    password: String,
    #[serde(default)]
    age_bracket: Option<String>,
}

#[derive(Serialize)]
struct RegisteredBody {
    username: String,
    age_bracket: Option<AgeBracket>,
}

pub async fn register(State(state): State<AppState>, ApiJson(body): ApiJson<RegisterBody>) -> Result<Response, ApiError> {
    let engine = state.engine()?;
    let bracket = match body.age_bracket.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Some(s.parse::<AgeBracket>().map_err(EngineError::from)?),
        None => None,
    };
    let account = blocking(move || engine.register(&body.username, &body.password, bracket)).await?;
    tracing::info!(user_id = %account.user_id, "user registered");
    Ok((
        StatusCode::CREATED,
        Json(RegisteredBody {
            username: account.username,
            age_bracket: account.age_bracket,
        }),
    )
        .into_response())
}

#[derive(Deserialize)]
pub struct LoginBody {
    username: String,
    password: String,
}

pub async fn login(State(state): State<AppState>, ApiJson(body): ApiJson<LoginBody>) -> Result<Response, ApiError> {
    let engine = state.engine()?;
    let ticket = blocking(move || engine.login(&body.username, &body.password)).await?;
    Ok(ticket_response(ticket))
}

pub async fn demo(State(state): State<AppState>) -> Result<Response, ApiError> {
    let engine = state.engine()?;
    let ticket = blocking(move || engine.start_demo()).await?;
    Ok(ticket_response(ticket))
}

pub async fn next_year(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<YearRoundView>, ApiError> {
    let (engine, token) = (state.engine()?, require_token(&headers)?);
    Ok(Json(blocking(move || engine.next_year_round(&token)).await?))
}

#[derive(Deserialize)]
pub struct GuessBody {
    round_id: String,
    guess: i64,
}

pub async fn submit_year(
    State(state): State<AppState>,
    headers: HeaderMap,
    ApiJson(body): ApiJson<GuessBody>,
) -> Result<Json<YearResult>, ApiError> {
    let (engine, token) = (state.engine()?, require_token(&headers)?);
    Ok(Json(blocking(move || engine.submit_year_guess(&token, &body.round_id, body.guess)).await?))
}

pub async fn next_timeline(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<TimelineRoundView>, ApiError> {
    let (engine, token) = (state.engine()?, require_token(&headers)?);
    Ok(Json(blocking(move || engine.next_timeline_round(&token)).await?))
}

#[derive(Deserialize)]
pub struct ChoiceBody {
    round_id: String,
    choice: TimelineChoice,
}

pub async fn submit_timeline(
    State(state): State<AppState>,
    headers: HeaderMap,
    ApiJson(body): ApiJson<ChoiceBody>,
) -> Result<Json<TimelineResult>, ApiError> {
    let (engine, token) = (state.engine()?, require_token(&headers)?);
    Ok(Json(
        blocking(move || engine.submit_timeline_choice(&token, &body.round_id, body.choice)).await?,
    ))
}

#[derive(Deserialize)]
pub struct LeaderboardQuery {
    kind: Option<String>,
    limit: Option<String>,
}

pub async fn leaderboard(
    State(state): State<AppState>,
    Query(q): Query<LeaderboardQuery>,
) -> Result<Json<Vec<LeaderboardEntry>>, ApiError> {
    let engine = state.engine()?;
    let kind = match q.kind.as_deref().unwrap_or("static") {
        "static" => PointKind::Static,
        "dynamic" => PointKind::Dynamic,
        other => return Err(ApiError::validation(format!("kind must be static or dynamic, not {other:?}"))),
    };
    let limit = match q.limit.as_deref() {
        None => 10,
        Some(s) => s
            .parse::<u32>()
            .ok()
            .filter(|n| (1..=MAX_LEADERBOARD_LIMIT).contains(n))
            .ok_or_else(|| ApiError::validation(format!("limit must be 1..={MAX_LEADERBOARD_LIMIT}")))?,
    };
    let entries = blocking(move || Ok(engine.repository().leaderboard(kind, limit)?)).await?;
    Ok(Json(entries))
}

#[derive(Serialize)]
pub struct Performance {
    pub decades: Vec<DecadeStats>,
    pub accuracy: ModeAccuracy,
}

/// The caller's own record: all their plays when registered, this
/// session's plays in demo mode.
fn performance_for(engine: &Engine, token: &str) -> Result<Performance, EngineError> {
    let (identity, session_id) = engine.whoami(token)?;
    let filter = match identity {
        Identity::User(id) => PlayFilter {
            user: Some(id),
            ..PlayFilter::registered()
        },
        Identity::Demo => PlayFilter {
            session_id: Some(session_id),
            ..PlayFilter::all()
        },
    };
    let repo = engine.repository();
    let plays = repo.plays(&filter)?;
    let abandoned = repo.abandoned_rounds(&filter)?;
    let decades = analytics::decade_stats(&plays, &abandoned, engine.catalog(), DecadeOptions { include_demo: true })
        .map_err(|e| EngineError::Store(photoyear_core::StoreError::Corrupt(e.to_string())))?;
    Ok(Performance {
        decades,
        accuracy: analytics::mode_accuracy(&plays),
    })
}

pub async fn performance(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Performance>, ApiError> {
    let (engine, token) = (state.engine()?, require_token(&headers)?);
    Ok(Json(blocking(move || performance_for(&engine, &token)).await?))
}

pub async fn image(State(state): State<AppState>, Path(key): Path<String>) -> Result<Response, ApiError> {
    let engine = state.engine()?;
    let record = engine
        .catalog()
        .get_by_asset_key(&key)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownImage", "no such image"))?;
    let path = state.image_dir.join(asset_file_name(&record.img_id));
    let bytes = tokio::fs::read(&path).await.map_err(|e| {
        tracing::warn!(path = %path.display(), error = %e, "asset unreadable");
        ApiError::new(StatusCode::NOT_FOUND, "AssetMissing", "image asset is not available")
    })?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/jpeg"),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

pub async fn healthz(State(state): State<AppState>) -> Response {
    match state.engine.get() {
        Some(engine) => Json(serde_json::json!({ "status": "ok", "images": engine.catalog().len() })).into_response(),
        None => ApiError::not_ready().into_response(),
    }
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed here")
}

/// One structured line per request. Paths and status only; headers, which
/// may carry tokens, are never logged.
pub async fn log_requests(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_owned());
    let start = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        %method,
        path,
        status = resp.status().as_u16(),
        elapsed_ms = start.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    resp
}
