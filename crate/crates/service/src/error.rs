use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use crate::config::ConfigError;

/// Failures while building or restoring a session.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] trustlens::ingest::IngestError),
    #[error(transparent)]
    Scoring(#[from] trustlens::scoring::ScoringError),
    #[error(transparent)]
    Preprocess(#[from] trustlens::preprocess::PreprocessError),
    #[error(transparent)]
    Synth(#[from] trustlens::synth::SynthError),
    #[error(transparent)]
    Pool(#[from] trustlens::active::PoolError),
    #[error(transparent)]
    Loop(#[from] trustlens::active::LoopError),
    #[error("seed labels: {0}")]
    SeedLabels(String),
    #[error("state directory: {0}")]
    State(String),
    #[error("replaying label log: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Request-level errors, rendered as `{"error": ...}` with a status code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}
