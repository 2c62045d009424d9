//! HTTP service. Writes funnel through one session mutex; reads use the
//! last published report and never take the lock.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use arc_swap::{ArcSwap, ArcSwapOption};
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};

use engagement_core::allocate::allocate_revenue;
use engagement_core::engine::{Engine, Session};
use engagement_core::score::{EngagementReport, EventScore, SourceMode};
use engagement_core::{Error, Result};

use crate::wire::{parse_basis, ErrorBody, EventInput, WaitlistRequest};
use crate::{report, waitlist, waitlist_corpus, WaitlistResult};

pub struct Loaded {
    engine: Arc<Engine>,
    session: Mutex<Session>,
    /// `None` until the first event lands.
    published: ArcSwap<Option<EngagementReport>>,
    events: std::sync::atomic::AtomicU64,
    mode: SourceMode,
}

impl Loaded {
    fn publish(&self, session: &Session) {
        self.published.store(Arc::new(report(session.ledger()).ok()));
        self.events
            .store(session.ledger().total_events(), std::sync::atomic::Ordering::Release);
    }

    fn report(&self) -> Result<EngagementReport> {
        self.published.load().as_ref().clone().ok_or(Error::EmptyLedger)
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    loaded: Arc<ArcSwapOption<Loaded>>,
}

impl AppState {
    /// A service with no model; every endpoint answers 503 until
    /// [`AppState::install`].
    pub fn unloaded() -> Self {
        Self::default()
    }

    pub fn install(&self, engine: Engine, session: Session, mode: SourceMode) {
        let loaded = Loaded {
            engine: Arc::new(engine),
            published: ArcSwap::from_pointee(None),
            events: Default::default(),
            session: Mutex::new(session),
            mode,
        };
        loaded.publish(&loaded.session.lock().expect("fresh mutex"));
        self.loaded.store(Some(Arc::new(loaded)));
    }

    /// Load the engine and ledger from `home`.
    pub fn load(home: &Path, mode: Option<SourceMode>) -> Result<Self> {
        let engine = Engine::load(home)?;
        let session = Session::open(home, &engine)?;
        let mode = mode.unwrap_or(engine.config().scoring.source_mode);
        let state = Self::unloaded();
        state.install(engine, session, mode);
        Ok(state)
    }

    fn get(&self) -> std::result::Result<Arc<Loaded>, ApiError> {
        self.loaded.load_full().ok_or_else(|| ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            body: ErrorBody {
                kind: "not_loaded".into(),
                message: "model not loaded".into(),
            },
        })
    }

    /// Write a ledger snapshot, if a model is loaded.
    pub fn snapshot(&self) -> Result<()> {
        match self.loaded.load_full() {
            Some(l) => l.session.lock().expect("session lock").snapshot(),
            None => Ok(()),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::InvalidEvent(_) | Error::EmptySource(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::SimilarityUndefined | Error::NotNormalized(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::FingerprintMismatch { .. } | Error::ClassMismatch(_) => StatusCode::CONFLICT,
        Error::EmptyLedger => StatusCode::NOT_FOUND,
        Error::InvalidArgument(_) | Error::Json(_) | Error::InvalidCorpus(_) => StatusCode::BAD_REQUEST,
        Error::Transport { .. } => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_for(&e),
            body: ErrorBody::from(&e),
        }
    }
}

fn bad_request(message: String) -> ApiError {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        body: ErrorBody {
            kind: "malformed_request".into(),
            message,
        },
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/events", post(post_event))
        .route("/v1/report", get(get_report))
        .route("/v1/allocation", get(get_allocation))
        .route("/v1/waitlist/score", post(post_waitlist))
        .route("/v1/healthz", get(healthz))
        .with_state(state)
}

async fn post_event(State(state): State<AppState>, body: Bytes) -> ApiResult<EventScore> {
    let loaded = state.get()?;
    let input: EventInput = serde_json::from_slice(&body).map_err(|e| bad_request(e.to_string()))?;
    if let Some(fp) = &input.fingerprint {
        if fp != loaded.engine.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: loaded.engine.fingerprint().to_string(),
                actual: fp.clone(),
            }
            .into());
        }
    }
    let event = input.into_event(Utc::now())?;
    let score = tokio::task::spawn_blocking(move || -> Result<EventScore> {
        if let Some(existing) = loaded.session.lock().expect("session lock").ledger().event(&event.event_id) {
            return Ok(existing.clone());
        }
        let score = loaded.engine.score(&event, loaded.mode)?;
        let mut session = loaded.session.lock().expect("session lock");
        let (score, new) = session.commit(event, score)?;
        if new {
            loaded.publish(&session);
        }
        Ok(score)
    })
    .await
    .map_err(|e| bad_request(format!("scoring task failed: {e}")))??;
    Ok(Json(score))
}

async fn get_report(State(state): State<AppState>) -> ApiResult<EngagementReport> {
    Ok(Json(state.get()?.report()?))
}

#[derive(Debug, Deserialize)]
pub struct AllocationQuery {
    total: u64,
    basis: Option<String>,
    alpha: Option<f64>,
}

async fn get_allocation(
    State(state): State<AppState>,
    query: std::result::Result<Query<AllocationQuery>, QueryRejection>,
) -> std::result::Result<Response, ApiError> {
    let loaded = state.get()?;
    let Query(q) = query.map_err(|e| bad_request(e.body_text()))?;
    let basis = parse_basis(q.basis.as_deref(), q.alpha)?;
    Ok(Json(allocate_revenue(q.total, &loaded.report()?, basis)?).into_response())
}

async fn post_waitlist(State(state): State<AppState>, body: Bytes) -> ApiResult<WaitlistResult> {
    let loaded = state.get()?;
    let req: WaitlistRequest = serde_json::from_slice(&body).map_err(|e| bad_request(e.to_string()))?;
    let basis = parse_basis(req.basis.as_deref(), req.alpha)?;
    let report = loaded.report()?;
    let result = tokio::task::spawn_blocking(move || {
        waitlist(&loaded.engine, &report, &waitlist_corpus(&req.providers)?, req.total, basis)
    })
    .await
    .map_err(|e| bad_request(format!("waitlist task failed: {e}")))??;
    Ok(Json(result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub fingerprint: String,
    pub events: u64,
}

async fn healthz(State(state): State<AppState>) -> ApiResult<Health> {
    let loaded = state.get()?;
    Ok(Json(Health {
        status: "ok".into(),
        fingerprint: loaded.engine.fingerprint().to_string(),
        events: loaded.events.load(std::sync::atomic::Ordering::Acquire),
    }))
}

/// Serve until interrupted, then snapshot the ledger.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    state.snapshot().map_err(std::io::Error::other)
}
