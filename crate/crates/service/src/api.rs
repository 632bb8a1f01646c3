//! HTTP routes used by the annotator UI.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower_http::services::ServeDir;
use trustlens::active::{LoopError, Phase, Strategy};
use trustlens::{ActiveLearner, Label};

use crate::config::ServiceConfig;
use crate::error::{ApiError, ServiceError};
use crate::session::Session;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    session: RwLock<Session>,
    retraining: AtomicBool,
}

impl AppState {
    pub fn new(config: ServiceConfig, session: Session) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                session: RwLock::new(session),
                retraining: AtomicBool::new(false),
            }),
        }
    }

    /// Opens the session on a blocking thread; scoring a large dataset
    /// and replaying the label log can take a while.
    pub async fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let cfg = config.clone();
        let session = tokio::task::spawn_blocking(move || Session::open(&cfg))
            .await
            .map_err(|e| ServiceError::State(e.to_string()))??;
        Ok(Self::new(config, session))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn is_retraining(&self) -> bool {
        self.inner.retraining.load(Ordering::SeqCst)
    }

    pub async fn session(&self) -> tokio::sync::RwLockReadGuard<'_, Session> {
        self.inner.session.read().await
    }

    fn ensure_idle(&self) -> Result<(), ApiError> {
        if self.is_retraining() {
            return Err(ApiError::Conflict("a retrain is in progress".into()));
        }
        Ok(())
    }

    /// Starts training on the current labels in the background and returns
    /// the round number it will record. Only one retrain runs at a time.
    pub async fn start_retrain(&self) -> Result<usize, ApiError> {
        if self.inner.retraining.swap(true, Ordering::SeqCst) {
            return Err(ApiError::Conflict("a retrain is already running".into()));
        }
        let job = self.inner.session.read().await.retrain_job();
        let mut learner = match job {
            Ok(l) => l,
            Err(e) => {
                self.inner.retraining.store(false, Ordering::SeqCst);
                return Err(e);
            }
        };
        let round = learner.round() + 1;
        let state = self.clone();
        tokio::spawn(async move {
            let trained = tokio::task::spawn_blocking(move || -> Result<ActiveLearner, LoopError> {
                learner.evaluate_round()?;
                Ok(learner)
            })
            .await;
            let mut session = state.inner.session.write().await;
            match trained {
                Ok(Ok(learner)) => {
                    if let Err(e) = session.finish_retrain(learner) {
                        session.last_error = Some(format!("writing snapshot: {e}"));
                    }
                }
                Ok(Err(e)) => session.last_error = Some(e.to_string()),
                Err(e) => session.last_error = Some(format!("retrain task failed: {e}")),
            }
            drop(session);
            state.inner.retraining.store(false, Ordering::SeqCst);
        });
        Ok(round)
    }

    /// Waits for a running retrain to finish.
    pub async fn wait_idle(&self) {
        while self.is_retraining() {
            tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/users/{id}/score", get(user_score))
        .route("/api/annotation/next", get(next_batch))
        .route("/api/annotation/labels", post(submit_labels))
        .route("/api/annotation/conflicts", get(conflicts))
        .route("/api/annotation/adjudicate", post(adjudicate))
        .route("/api/model/metrics", get(metrics))
        .route("/api/model/retrain", post(retrain));
    let api = match &state.config().static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Evaluate => "evaluate",
        Phase::Query => "query",
        Phase::Finished(_) => "finished",
    }
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let s = state.session().await;
    Json(json!({
        "status": "ok",
        "dataset_loaded": s.n_users() > 0,
        "users": s.n_users(),
        "model_trained": s.learner().state().trained,
        "retraining": state.is_retraining(),
        "phase": phase_name(s.learner().phase()),
        "round": s.learner().round(),
    }))
}

async fn user_score(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = state.session().await;
    let entry = s.user(&id).ok_or_else(|| ApiError::NotFound(format!("unknown user {id}")))?;
    Ok(Json(json!({
        "user_id": id,
        "influence": entry.raw.influence,
        "raw": entry.raw,
        "normalized": entry.normalized,
        "label": s.label_of(&id),
    })))
}

#[derive(Debug, Deserialize)]
struct NextParams {
    strategy: Option<Strategy>,
    batch: Option<usize>,
}

async fn next_batch(
    State(state): State<AppState>,
    params: Result<Query<NextParams>, QueryRejection>,
) -> Result<Json<Value>, ApiError> {
    let Query(params) = params.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let cfg = state.config();
    if params.strategy.is_some_and(|s| s != cfg.strategy) {
        return Err(ApiError::BadRequest(format!("this session selects with {:?}", cfg.strategy)));
    }
    if params.batch.is_some_and(|b| b != cfg.batch_size) {
        return Err(ApiError::BadRequest(format!("this session uses batches of {}", cfg.batch_size)));
    }
    state.ensure_idle()?;
    let mut s = state.inner.session.write().await;
    if let Phase::Finished(reason) = s.learner().phase() {
        return Ok(Json(json!({ "round": s.learner().round(), "finished": reason, "items": [] })));
    }
    let items = s.batch_items()?;
    Ok(Json(json!({
        "round": s.learner().round(),
        "strategy": cfg.strategy,
        "batch_size": cfg.batch_size,
        "items": items,
    })))
}

fn parse_label(v: &Value) -> Result<Label, ApiError> {
    v.as_i64()
        .and_then(|i| Label::try_from(i).ok())
        .ok_or_else(|| ApiError::BadRequest(format!("label must be 0 or 1, got {v}")))
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value, ApiError> {
    obj.get(key).ok_or_else(|| ApiError::BadRequest(format!("missing field `{key}`")))
}

fn string_field(obj: &Value, key: &str) -> Result<String, ApiError> {
    field(obj, key)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ApiError::BadRequest(format!("`{key}` must be a string")))
}

/// Accepts one vote object or an array of them:
/// `{"user_id": "...", "annotator_id": "...", "label": 0|1}`.
fn parse_votes(body: &Value) -> Result<Vec<(String, String, Label)>, ApiError> {
    let items = match body {
        Value::Array(items) => items.iter().collect(),
        Value::Object(_) => vec![body],
        _ => return Err(ApiError::BadRequest("expected a vote object or an array of votes".into())),
    };
    if items.is_empty() {
        return Err(ApiError::BadRequest("no votes submitted".into()));
    }
    items
        .into_iter()
        .map(|v| Ok((string_field(v, "user_id")?, string_field(v, "annotator_id")?, parse_label(field(v, "label")?)?)))
        .collect()
}

async fn submit_labels(
    State(state): State<AppState>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let votes = parse_votes(&body)?;
    state.ensure_idle()?;
    let outcome = state.inner.session.write().await.submit(votes)?;
    respond_to_outcome(&state, outcome).await
}

async fn respond_to_outcome(state: &AppState, outcome: crate::session::SubmitOutcome) -> Result<Json<Value>, ApiError> {
    let retrain_round = if outcome.batch_complete {
        Some(state.start_retrain().await?)
    } else {
        None
    };
    let conflicts: Vec<&str> = outcome
        .results
        .iter()
        .filter(|r| r.submission == trustlens::active::Submission::Conflict)
        .map(|r| r.user_id.as_str())
        .collect();
    Ok(Json(json!({
        "accepted": outcome.results.len(),
        "results": outcome.results,
        "conflicts": conflicts,
        "batch_complete": outcome.batch_complete,
        "retrain_round": retrain_round,
    })))
}

async fn conflicts(State(state): State<AppState>) -> Json<Value> {
    let s = state.session().await;
    Json(json!({ "conflicts": s.book().conflicts() }))
}

async fn adjudicate(
    State(state): State<AppState>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let user_id = string_field(&body, "user_id")?;
    let adjudicator = string_field(&body, "adjudicator")?;
    let label = parse_label(field(&body, "label")?)?;
    state.ensure_idle()?;
    let outcome = state.inner.session.write().await.adjudicate(user_id, adjudicator, label)?;
    respond_to_outcome(&state, outcome).await
}

async fn metrics(State(state): State<AppState>) -> Json<Value> {
    let s = state.session().await;
    let learner = s.learner();
    let stop_reason = match learner.phase() {
        Phase::Finished(reason) => Some(reason),
        _ => None,
    };
    Json(json!({
        "phase": phase_name(learner.phase()),
        "stop_reason": stop_reason,
        "round": learner.round(),
        "labeled": learner.pool().labeled().len(),
        "unlabeled": learner.pool().unlabeled().len(),
        "learner": learner.state().learner_kind,
        "hyperparameters": learner.state().hyperparameters,
        "latest": learner.curve().last(),
        "curve": learner.curve(),
        "retraining": state.is_retraining(),
        "last_error": s.last_error,
    }))
}

async fn retrain(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let round = state.start_retrain().await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "round_index": round }))))
}
