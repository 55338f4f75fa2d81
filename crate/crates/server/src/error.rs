use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use photoyear_core::{EngineError, StoreError};
use serde_json::json;

/// Every failed request answers `{"error": {"code", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "ValidationError", message)
    }

    pub fn unauthenticated() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthenticated", "missing, unknown or expired session")
    }

    pub fn not_ready() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "NotReady", "service is starting")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Unauthenticated | EngineError::Store(StoreError::AuthFailed) => StatusCode::UNAUTHORIZED,
            EngineError::UnknownUser => StatusCode::UNAUTHORIZED,
            EngineError::DemoDisabled => StatusCode::FORBIDDEN,
            EngineError::UnknownRound => StatusCode::NOT_FOUND,
            EngineError::RoundAlreadyAnswered | EngineError::Store(StoreError::UsernameTaken) => StatusCode::CONFLICT,
            EngineError::GuessOutOfRange(_)
            | EngineError::Store(StoreError::WeakPassword)
            | EngineError::Store(StoreError::InvalidUsername)
            | EngineError::Store(StoreError::InvalidAgeBracket(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::EmptyCatalog | EngineError::NoDistinctYears => StatusCode::SERVICE_UNAVAILABLE,
            EngineError::Store(_) | EngineError::Scoring(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(code = e.code(), error = %e, "request failed");
        }
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}
