//! HTTP API over dialog sessions.
//!
//! Sessions live in memory and expire after a period without requests.
//! Each session sits behind its own lock, so requests for one session are
//! handled one at a time while different sessions proceed in parallel.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mixdialog::bundles::{self, Bundle, BundleError};
use mixdialog::trace::{build_trace, render_notation};
use mixdialog::{render_script, EngineConfig, EngineError, Phase, Session, Turn};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 8737;
pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub session_id: String,
    pub phase: Phase,
    pub pending_prompts: Vec<String>,
    /// Every declared slot; `None` while unfilled.
    pub slots: BTreeMap<String, Option<String>>,
    pub residual_script: String,
    pub trace_notation: String,
    pub turn_log: Vec<String>,
}

impl SessionSnapshot {
    pub fn of(id: &str, s: &Session) -> Self {
        let pending_prompts = match s.pending() {
            Some(_) => s
                .turn_log()
                .iter()
                .rev()
                .find_map(|t| match t {
                    Turn::SystemPrompt { text, .. } => Some(text.clone()),
                    _ => None,
                })
                .into_iter()
                .collect(),
            None => Vec::new(),
        };
        let slots = s
            .original()
            .declared_slots()
            .into_iter()
            .map(|slot| (slot.to_string(), s.store().value(slot).map(str::to_string)))
            .collect();
        let trace = build_trace(s.turn_log(), s.config().greeting_as_response)
            .map(|t| render_notation(&t))
            .unwrap_or_default();
        SessionSnapshot {
            session_id: id.to_string(),
            phase: s.phase(),
            pending_prompts,
            slots,
            residual_script: render_script(s.residual()),
            trace_notation: trace,
            turn_log: s.turn_log().iter().map(Turn::line).collect(),
        }
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

#[derive(Clone)]
pub struct AppState {
    bundles: Arc<BTreeMap<String, Bundle>>,
    sessions: Arc<std::sync::Mutex<HashMap<String, Entry>>>,
    config: EngineConfig,
    idle: Duration,
}

impl AppState {
    pub fn new(bundles: BTreeMap<String, Bundle>, config: EngineConfig, idle: Duration) -> Self {
        AppState { bundles: Arc::new(bundles), sessions: Default::default(), config, idle }
    }

    pub fn script_ids(&self) -> Vec<String> {
        self.bundles.keys().cloned().collect()
    }

    /// Drops sessions idle for longer than the expiry period.
    pub fn sweep(&self) {
        let now = Instant::now();
        self.sessions.lock().unwrap().retain(|_, e| now.duration_since(e.last_used) < self.idle);
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn lookup(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sweep();
        let mut sessions = self.sessions.lock().unwrap();
        let entry = sessions.get_mut(id)?;
        entry.last_used = Instant::now();
        Some(entry.session.clone())
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    NotActive,
    Unprocessable(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::NotActive => (StatusCode::CONFLICT, "session is not active".to_string()),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
        };
        (status, Json(ErrorBody { error: message })).into_response()
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Deserialize)]
pub struct CreateSession {
    pub script: String,
}

#[derive(Deserialize)]
pub struct Utterance {
    pub text: String,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/scripts", get(list_scripts))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/utterances", post(post_utterance))
        .with_state(state)
}

async fn list_scripts(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.script_ids())
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionSnapshot>), ApiError> {
    let bundle = state.bundles.get(&req.script).ok_or_else(|| ApiError::NotFound(format!("unknown script {}", req.script)))?;
    let mut session = bundle.session(state.config.clone()).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    session.next_output();
    let id = uuid::Uuid::new_v4().to_string();
    let snapshot = SessionSnapshot::of(&id, &session);
    state.sweep();
    state
        .sessions
        .lock()
        .unwrap()
        .insert(id, Entry { session: Arc::new(Mutex::new(session)), last_used: Instant::now() });
    Ok((StatusCode::CREATED, Json(snapshot)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSnapshot>, ApiError> {
    let session = state.lookup(&id).ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))?;
    let session = session.lock().await;
    Ok(Json(SessionSnapshot::of(&id, &session)))
}

async fn post_utterance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<Utterance>,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let session = state.lookup(&id).ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))?;
    let mut session = session.lock().await;
    match session.submit_utterance(&req.text) {
        Ok(_) => {}
        Err(EngineError::SessionNotActive | EngineError::NoPendingPrompt) => return Err(ApiError::NotActive),
        Err(e) => return Err(ApiError::Unprocessable(e.to_string())),
    }
    session.next_output();
    Ok(Json(SessionSnapshot::of(&id, &session)))
}

#[derive(Debug, Clone, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Directory of `.dlg` scripts and the `.gram` files they name. The
    /// built-in pizza bundles are always available.
    #[arg(long)]
    pub scripts_dir: Option<PathBuf>,
    /// Static files served under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Built-in bundles plus those found in `dir`, which win on id clashes.
pub fn load_bundles(dir: Option<&std::path::Path>) -> Result<BTreeMap<String, Bundle>, BundleError> {
    let mut all = Bundle::builtin();
    if let Some(dir) = dir {
        all.extend(bundles::load_dir(dir)?);
    }
    Ok(all)
}

pub async fn serve(args: ServeArgs, config: EngineConfig) -> Result<(), Box<dyn std::error::Error>> {
    let state = AppState::new(load_bundles(args.scripts_dir.as_deref())?, config, DEFAULT_IDLE);
    let mut app = router(state.clone());
    if let Some(dir) = &args.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let addr = SocketAddr::from(([127, 0, 0, 1], args.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, app).await?;
    Ok(())
}
