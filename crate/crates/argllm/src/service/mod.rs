//! HTTP session service.
//!
//! Each session holds settings, at most one argument tree with its
//! strengths, grounding documents and a chat transcript. Every successful
//! mutation bumps the session's revision by one, recomputes strengths and
//! writes a snapshot before the response is sent.
//!
//! Mutations on one session are serialised by a per-session mutex. Calls
//! to the language model run without holding it; their results are applied
//! only if the revision is unchanged, otherwise the request fails with
//! `409 conflict`.

mod error;
mod handlers;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::DefaultBodyLimit;
use axum::http::HeaderValue;
use axum::routing::{get, patch, post, put};
use axum::Router;
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use session::{
    ChatEntry, ChatRole, DocumentMeta, Session, Settings, Verdict, VerdictInfo, MAX_DOCUMENTS, VERDICT_THRESHOLD,
};
pub use store::Store;

use crate::gateway::BackendConfig;
use crate::ingest::MAX_PDF_BYTES;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub store: Store,
    /// Backend given to new sessions.
    pub default_backend: BackendConfig,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    /// Static UI assets served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

type SessionHandle = Arc<Mutex<Session>>;

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    store: Store,
    default_backend: BackendConfig,
}

impl AppState {
    /// Opens the store and loads every session found in it.
    pub fn load(store: Store, default_backend: BackendConfig) -> std::io::Result<Self> {
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(AppState { inner: Arc::new(Inner { sessions: RwLock::new(sessions), store, default_backend }) })
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map lock").len()
    }

    fn handle(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.inner.sessions.read().expect("session map lock").get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    fn insert(&self, session: Session) {
        let id = session.id.clone();
        self.inner.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(session)));
    }

    fn remove(&self, id: &str) -> Option<SessionHandle> {
        self.inner.sessions.write().expect("session map lock").remove(id)
    }

    fn store(&self) -> &Store {
        &self.inner.store
    }

    fn default_backend(&self) -> &BackendConfig {
        &self.inner.default_backend
    }
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() {
        layer.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        layer.allow_origin(AllowOrigin::list(list))
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/healthz", get(handlers::health))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session).delete(handlers::delete_session))
        .route("/sessions/{id}/settings", put(handlers::update_settings))
        .route("/sessions/{id}/claim", post(handlers::submit_claim))
        .route("/sessions/{id}/arguments", post(handlers::add_argument))
        .route("/sessions/{id}/arguments/{aid}", patch(handlers::patch_base_score))
        .route("/sessions/{id}/documents", post(handlers::upload_document))
        .route("/sessions/{id}/chat", post(handlers::post_chat))
        .layer(DefaultBodyLimit::max(MAX_PDF_BYTES + 1024 * 1024))
        .with_state(state);
    let app = match &config.ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors(&config.cors_origins))
}

/// State loaded from `config.store` plus the router over it.
pub fn app(config: &ServiceConfig) -> std::io::Result<(AppState, Router)> {
    let state = AppState::load(config.store.clone(), config.default_backend.clone())?;
    Ok((state.clone(), router(state, config)))
}
