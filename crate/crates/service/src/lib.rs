//! Single-session HTTP service around the cohort pipeline.
//!
//! Mutating endpoints queue on one writer lock and publish a fresh
//! [`Session`] snapshot when they succeed; readers clone the current
//! snapshot and never observe a half-applied change.

mod error;
pub mod payload;
pub mod session;

use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use ontocohort::ConceptCode;
use serde::de::DeserializeOwned;
use tokio::sync::Mutex;

pub use error::{ApiError, ErrorBody};
pub use payload::{
    BorderStyle, HistoryPayload, NodeDetail, RenderEdge, RenderNode, RenderPayload, SessionSummary,
    Stage,
};
pub use session::{AugmentRequest, FilterRequest, LoadRequest, SaveRequest, SaveResponse, Session};

pub const DEFAULT_BODY_LIMIT: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }
}

#[derive(Default)]
struct Inner {
    current: RwLock<Option<Arc<Session>>>,
    writer: Mutex<()>,
}

/// Shared handle to the service state.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_session(session: Session) -> Self {
        let state = Self::new();
        state.publish(session);
        state
    }

    /// The current snapshot, if a session is loaded.
    pub fn snapshot(&self) -> Option<Arc<Session>> {
        self.inner
            .current
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn publish(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        *self
            .inner
            .current
            .write()
            .unwrap_or_else(|e| e.into_inner()) = Some(session.clone());
        session
    }

    fn require(&self) -> Result<Arc<Session>, ApiError> {
        self.snapshot().ok_or_else(ApiError::no_session)
    }

    /// Runs `step` on the blocking pool while holding the writer lock, then
    /// publishes the session it returns.
    async fn mutate<T, F>(&self, step: F) -> Result<(Arc<Session>, T), ApiError>
    where
        T: Send + 'static,
        F: FnOnce(Option<Arc<Session>>) -> Result<(Session, T), ApiError> + Send + 'static,
    {
        let _guard = self.inner.writer.lock().await;
        let current = self.snapshot();
        let (next, out) = tokio::task::spawn_blocking(move || step(current))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
        Ok((self.publish(next), out))
    }
}

fn body<T: DeserializeOwned>(req: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    req.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn loaded(current: Option<Arc<Session>>) -> Result<Arc<Session>, ApiError> {
    current.ok_or_else(ApiError::no_session)
}

async fn load(
    State(state): State<AppState>,
    req: Result<Json<LoadRequest>, JsonRejection>,
) -> ApiResult<SessionSummary> {
    let req = body(req)?;
    let (session, ()) = state
        .mutate(move |_| Ok((Session::load(&req)?, ())))
        .await?;
    Ok(Json(payload::summary(&session)))
}

async fn get_session(State(state): State<AppState>) -> ApiResult<SessionSummary> {
    let session = state.require()?;
    Ok(Json(payload::summary(&session)))
}

async fn apply_filter(
    State(state): State<AppState>,
    req: Result<Json<FilterRequest>, JsonRejection>,
) -> ApiResult<RenderPayload> {
    let req = body(req)?;
    let (session, ()) = state
        .mutate(move |cur| Ok((loaded(cur)?.apply_filter(&req)?, ())))
        .await?;
    Ok(Json(payload::render(&session)?))
}

async fn node(State(state): State<AppState>, Path(code): Path<String>) -> ApiResult<NodeDetail> {
    let session = state.require()?;
    Ok(Json(payload::node_detail(
        &session,
        &ConceptCode::new(code),
    )?))
}

async fn apply_augment(
    State(state): State<AppState>,
    req: Result<Json<AugmentRequest>, JsonRejection>,
) -> ApiResult<RenderPayload> {
    let req = body(req)?;
    let (session, ()) = state
        .mutate(move |cur| Ok((loaded(cur)?.apply_augment(&req)?, ())))
        .await?;
    Ok(Json(payload::render(&session)?))
}

async fn save(
    State(state): State<AppState>,
    req: Result<Json<SaveRequest>, JsonRejection>,
) -> ApiResult<SaveResponse> {
    let req = body(req)?;
    let (_, saved) = state.mutate(move |cur| loaded(cur)?.save(&req)).await?;
    Ok(Json(saved))
}

async fn reset(State(state): State<AppState>) -> ApiResult<SessionSummary> {
    let (session, ()) = state.mutate(|cur| Ok((loaded(cur)?.reset(), ()))).await?;
    Ok(Json(payload::summary(&session)))
}

async fn history(State(state): State<AppState>) -> ApiResult<HistoryPayload> {
    let session = state.require()?;
    Ok(Json(payload::history(&session)))
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    Router::new()
        .route("/session/load", post(load))
        .route("/session", get(get_session))
        .route("/session/history", get(history))
        .route("/filter", post(apply_filter))
        .route("/nodes/{code}", get(node))
        .route("/augment", post(apply_augment))
        .route("/save", post(save))
        .route("/reset", post(reset))
        .layer(DefaultBodyLimit::max(config.body_limit))
        .with_state(state)
}

/// Serves `router` on an already bound listener until the process stops.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    config: &ServiceConfig,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, config)).await
}
