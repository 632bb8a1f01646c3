//! HTTP service for interactive annotation and scoring.
//!
//! Two or more annotators label the batches the active learner selects;
//! agreed labels are staged until the whole batch is resolved, then the
//! model retrains in the background. See [`api::router`] for the routes.

pub mod api;
pub mod config;
pub mod error;
pub mod session;

pub use api::{router, AppState};
pub use config::{DatasetSource, ServiceConfig};
pub use error::{ApiError, ServiceError};
pub use session::Session;

use tokio::net::TcpListener;

/// Binds the configured address and serves until the process exits.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = TcpListener::bind(&config.bind).await?;
    serve_on(listener, config).await
}

pub async fn serve_on(listener: TcpListener, config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(config).await?;
    let needs_training = state.session().await.needs_training();
    let trained = state.session().await.learner().state().trained;
    if needs_training && (state.config().train_on_start || trained) {
        // nothing else can be running yet
        state.start_retrain().await.expect("idle at startup");
    }
    axum::serve(listener, router(state)).await?;
    Ok(())
}
