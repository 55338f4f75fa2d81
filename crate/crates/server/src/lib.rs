//! HTTP front end for the photo-dating game.
//!
//! The listener comes up before the catalog is loaded; until the engine is
//! ready every game route and `/healthz` answer 503.

pub mod config;
pub mod error;
pub mod routes;

use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use anyhow::Context;
use axum::routing::get;
use axum::{middleware, Router};
use photoyear_core::persistence::CredentialHasher;
use photoyear_core::{catalog, Engine, LoadOptions, SqliteRepository, SystemClock};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use config::{ApiConfig, ConfigError};
pub use error::ApiError;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<OnceLock<Arc<Engine>>>,
    image_dir: PathBuf,
}

impl AppState {
    /// Not ready until [`AppState::set_engine`] is called.
    pub fn new(image_dir: impl Into<PathBuf>) -> Self {
        AppState {
            engine: Arc::new(OnceLock::new()),
            image_dir: image_dir.into(),
        }
    }

    pub fn ready(engine: Arc<Engine>, image_dir: impl Into<PathBuf>) -> Self {
        let state = Self::new(image_dir);
        state.set_engine(engine);
        state
    }

    pub fn set_engine(&self, engine: Arc<Engine>) {
        let _ = self.engine.set(engine);
    }

    pub fn engine(&self) -> Result<Arc<Engine>, ApiError> {
        self.engine.get().cloned().ok_or_else(ApiError::not_ready)
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/register", axum::routing::post(routes::register))
        .route("/api/login", axum::routing::post(routes::login))
        .route("/api/demo", axum::routing::post(routes::demo))
        .route("/api/guess_the_year", get(routes::next_year).post(routes::submit_year))
        .route("/api/timeline_challenge", get(routes::next_timeline).post(routes::submit_timeline))
        .route("/api/leaderboard", get(routes::leaderboard))
        .route("/api/performance", get(routes::performance))
        .route("/images/{key}", get(routes::image))
        .route("/healthz", get(routes::healthz))
        .method_not_allowed_fallback(routes::method_not_allowed);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(routes::not_found),
    };
    app.with_state(state).layer(middleware::from_fn(routes::log_requests))
}

/// Load the catalog, open storage and build the engine.
pub fn build_engine(config: &ApiConfig) -> anyhow::Result<Engine> {
    let file = std::fs::File::open(&config.catalog_path)
        .with_context(|| format!("opening catalog {}", config.catalog_path.display()))?;
    let opts = LoadOptions {
        allow_partial_years: config.allow_partial_years,
    };
    let (catalog, report) = catalog::load_catalog(std::io::BufReader::new(file), &opts)
        .with_context(|| format!("loading catalog {}", config.catalog_path.display()))?;
    if !report.rejected.is_empty() {
        tracing::warn!(rejected = report.rejected.len(), "catalog rows rejected");
    }
    if !config.allow_partial_years {
        catalog.ensure_complete()?;
    }
    let hasher = CredentialHasher::new(config.hashing.cost())?;
    let repo = SqliteRepository::open_url(&config.storage_url, hasher)
        .with_context(|| format!("opening storage {}", config.storage_url))?;
    let engine = Engine::new(catalog, Arc::new(repo), Arc::new(SystemClock), config.engine_config())?;
    tracing::info!(images = engine.catalog().len(), "engine ready");
    Ok(engine)
}

/// Serve until `shutdown` resolves, then finish in-flight requests.
///
/// The engine is built in the background after the listener is bound. A
/// failed build stops the server and is returned.
pub async fn serve(
    config: ApiConfig,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let state = AppState::new(&config.image_dir);
    let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<anyhow::Error>();

    let loader_state = state.clone();
    let loader_config = config.clone();
    tokio::spawn(async move {
        match tokio::task::spawn_blocking(move || build_engine(&loader_config)).await {
            Ok(Ok(engine)) => loader_state.set_engine(Arc::new(engine)),
            Ok(Err(e)) => {
                let _ = fail_tx.send(e);
            }
            Err(e) => {
                let _ = fail_tx.send(anyhow::anyhow!("engine loader panicked: {e}"));
            }
        }
    });

    let failure: Arc<std::sync::Mutex<Option<anyhow::Error>>> = Arc::default();
    let failure_slot = Arc::clone(&failure);
    let stop = async move {
        tokio::select! {
            _ = shutdown => tracing::info!("shutdown requested"),
            Ok(e) = fail_rx => {
                tracing::error!(error = %format!("{e:#}"), "startup failed");
                *failure_slot.lock().expect("failure slot") = Some(e);
            }
        }
    };

    let interval = Duration::from_secs(config.purge_interval_secs.max(1));
    serve_state(state, config.static_dir.clone(), interval, listener, stop).await?;
    let failed = failure.lock().expect("failure slot").take();
    match failed {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Serve `state` until `shutdown` resolves, purging idle sessions every
/// `purge_interval`. Requests already accepted are completed before return.
pub async fn serve_state(
    state: AppState,
    static_dir: Option<PathBuf>,
    purge_interval: Duration,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone(), static_dir);
    let purger = tokio::spawn(async move {
        let mut tick = tokio::time::interval(purge_interval);
        tick.tick().await;
        loop {
            tick.tick().await;
            if let Ok(engine) = state.engine() {
                match tokio::task::spawn_blocking(move || engine.purge_expired()).await {
                    Ok(Ok(n)) if n > 0 => tracing::info!(sessions = n, "purged idle sessions"),
                    Ok(Err(e)) => tracing::warn!(error = %e, "session purge failed"),
                    _ => {}
                }
            }
        }
    });

    tracing::info!(addr = %listener.local_addr()?, "listening");
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    purger.abort();
    tracing::info!("stopped");
    result
}

/// Resolves on SIGTERM or Ctrl-C.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
