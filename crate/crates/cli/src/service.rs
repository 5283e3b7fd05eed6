//! Local HTTP session service driven by the annotator UI.
//!
//! | method | path | effect |
//! |---|---|---|
//! | POST | `/sessions` | load frames, `{"source": path}` or `{"phantom": {...}}` |
//! | GET | `/sessions/{id}` | state, config, progress |
//! | GET | `/sessions/{id}/frames/{k}` | frame `k` as PNG |
//! | POST | `/sessions/{id}/seed` | `{"x", "y", "config"}`, state becomes `seeded` |
//! | POST | `/sessions/{id}/run` | start tracking in the background |
//! | GET | `/sessions/{id}/result` | per-frame rows, JSON or `?format=csv` |
//! | GET | `/sessions/{id}/overlay/{k}` | frame `k` with the tracked circle |
//!
//! A session moves `loaded → seeded → running → done | failed`; re-seeding
//! a seeded session is allowed, everything else out of order is a 409.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use activecircle::phantom::{render_phantom, PhantomSpec, PhantomTruth};
use activecircle::{Frame, FrameResult, TrackResult};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ConfigOverrides, RunConfig};
use crate::io::{frame_to_gray8, load_video, track_csv_string};
use crate::overlay::render_overlay;
use crate::pipeline::run_tracking;

/// Port used when neither `--port` nor the environment sets one.
pub const DEFAULT_PORT: u16 = 8080;

/// Environment variable overriding the service port.
pub const PORT_ENV: &str = "ACTIVECIRCLE_PORT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Loaded,
    Seeded,
    Running,
    Done,
    Failed,
}

impl SessionState {
    pub fn can_move_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Loaded, Seeded) | (Seeded, Seeded) | (Seeded, Running) | (Running, Done) | (Running, Failed)
        )
    }
}

struct Session {
    frames: Arc<Vec<Frame>>,
    truth: Option<PhantomTruth>,
    config: RunConfig,
    seed: Option<[f64; 2]>,
    state: SessionState,
    progress: Arc<Mutex<Vec<FrameResult>>>,
    result: Option<TrackResult>,
    error: Option<String>,
}

impl Session {
    fn transition(&mut self, next: SessionState) {
        assert!(
            self.state.can_move_to(next),
            "illegal session transition {:?} -> {:?}",
            self.state,
            next
        );
        self.state = next;
    }

    fn completed(&self) -> usize {
        match &self.result {
            Some(r) => r.per_frame.len(),
            None => self.progress.lock().expect("progress lock").len(),
        }
    }

    /// Finished rows so far, the full result once done.
    fn rows(&self) -> Vec<FrameResult> {
        match &self.result {
            Some(r) => r.per_frame.clone(),
            None => self.progress.lock().expect("progress lock").clone(),
        }
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Session>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let mut sessions = self.sessions.lock().expect("session store lock");
        let session = sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))?;
        f(session)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    state: Option<SessionState>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            state: None,
        }
    }

    fn in_state(status: StatusCode, message: impl Into<String>, state: SessionState) -> Self {
        Self {
            state: Some(state),
            ..Self::new(status, message)
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "state": self.state }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// Frame directory or phantom spec file on the server.
    pub source: Option<String>,
    /// Inline phantom spec; unset keys take the standard values.
    pub phantom: Option<PhantomSpec>,
    pub pixel_spacing_cm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRequest {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub config: ConfigOverrides,
}

#[derive(Debug, Serialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub pixel_spacing_cm: f64,
    pub fps: Option<f64>,
    pub has_truth: bool,
    pub seed: Option<[f64; 2]>,
    pub config: RunConfig,
    pub progress: Progress,
    pub error: Option<String>,
}

/// One result row, the same columns as the track CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub frame_index: usize,
    pub x_c: f64,
    pub y_c: f64,
    #[serde(rename = "R_px")]
    pub r_px: f64,
    pub diameter_px: f64,
    pub diameter_cm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultRow {
    fn new(frame_index: usize, r: &FrameResult) -> Self {
        Self {
            frame_index,
            x_c: r.circle.x_c,
            y_c: r.circle.y_c,
            r_px: r.circle.radius,
            diameter_px: r.diameter_px,
            diameter_cm: r.diameter_cm,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ResultView {
    pub id: String,
    pub state: SessionState,
    pub progress: Progress,
    pub rows: Vec<ResultRow>,
    pub error: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ResultQuery {
    pub format: Option<String>,
}

fn view(id: &str, s: &Session) -> SessionView {
    let first = &s.frames[0];
    SessionView {
        id: id.to_string(),
        state: s.state,
        frame_count: s.frames.len(),
        width: first.width(),
        height: first.height(),
        pixel_spacing_cm: first.pixel_spacing_cm(),
        fps: s.truth.as_ref().map(|_| PhantomSpec::standard().fps),
        has_truth: s.truth.is_some(),
        seed: s.seed,
        config: s.config,
        progress: Progress {
            completed: s.completed(),
            total: s.frames.len(),
        },
        error: s.error.clone(),
    }
}

fn png(img: impl Into<image::DynamicImage>) -> Response {
    let mut bytes = Vec::new();
    img.into()
        .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .expect("PNG encoding to memory");
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn create_session(
    State(app): State<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let loaded = tokio::task::spawn_blocking(move || -> Result<_, String> {
        let (frames, truth) = match (req.source, req.phantom) {
            (Some(path), None) => {
                let video = load_video(FsPath::new(&path), req.pixel_spacing_cm).map_err(|e| e.to_string())?;
                (video.frames, video.truth)
            }
            (None, Some(spec)) => {
                let spec = PhantomSpec {
                    pixel_spacing_cm: req.pixel_spacing_cm.or(spec.pixel_spacing_cm),
                    ..spec
                };
                let (frames, truth) = render_phantom(&spec).map_err(|e| e.to_string())?;
                (frames, Some(truth))
            }
            _ => return Err("give exactly one of `source` or `phantom`".into()),
        };
        Ok((frames, truth))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;

    let (frames, truth) = loaded;
    let id = format!("s{:06}", app.next_id.fetch_add(1, Ordering::Relaxed) + 1);
    let session = Session {
        frames: Arc::new(frames),
        truth,
        config: RunConfig::default(),
        seed: None,
        state: SessionState::Loaded,
        progress: Arc::default(),
        result: None,
        error: None,
    };
    let body = json!({ "id": id, "state": session.state, "frame_count": session.frames.len() });
    app.sessions.lock().expect("session store lock").insert(id, session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    app.with_session(&id, |s| Ok(Json(view(&id, s))))
}

fn frame_of(s: &Session, k: usize) -> Result<&Frame, ApiError> {
    s.frames.get(k).ok_or_else(|| {
        ApiError::in_state(
            StatusCode::NOT_FOUND,
            format!("frame {k} out of range 0..{}", s.frames.len()),
            s.state,
        )
    })
}

async fn get_frame(State(app): State<AppState>, Path((id, k)): Path<(String, usize)>) -> Result<Response, ApiError> {
    let img = app.with_session(&id, |s| Ok(frame_to_gray8(frame_of(s, k)?)))?;
    Ok(png(img))
}

async fn seed_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SeedRequest>,
) -> Result<Json<SessionView>, ApiError> {
    app.with_session(&id, |s| {
        if !s.state.can_move_to(SessionState::Seeded) {
            return Err(ApiError::in_state(
                StatusCode::CONFLICT,
                format!("cannot seed a session that is {:?}", s.state).to_lowercase(),
                s.state,
            ));
        }
        let first = &s.frames[0];
        if !first.contains(req.x, req.y) {
            return Err(ApiError::in_state(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!(
                    "seed out of bounds: ({}, {}) not in {}x{} frame",
                    req.x,
                    req.y,
                    first.width(),
                    first.height()
                ),
                s.state,
            ));
        }
        let config = req
            .config
            .apply(RunConfig::default())
            .map_err(|e| ApiError::in_state(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), s.state))?;
        s.config = config;
        s.seed = Some([req.x, req.y]);
        s.transition(SessionState::Seeded);
        Ok(Json(view(&id, s)))
    })
}

async fn run_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let (frames, seed, config, progress, body) = app.with_session(&id, |s| {
        if s.state != SessionState::Seeded {
            let message = match s.state {
                SessionState::Loaded => "session has no seed yet".to_string(),
                other => format!("cannot run a session that is {other:?}").to_lowercase(),
            };
            return Err(ApiError::in_state(StatusCode::CONFLICT, message, s.state));
        }
        s.transition(SessionState::Running);
        s.progress.lock().expect("progress lock").clear();
        let seed = s.seed.expect("seeded sessions have a seed");
        Ok((s.frames.clone(), seed, s.config, s.progress.clone(), view(&id, s)))
    })?;

    let store = app.clone();
    tokio::task::spawn_blocking(move || {
        let sink = progress.clone();
        let outcome = run_tracking(&frames, seed, &config, |_, r| {
            sink.lock().expect("progress lock").push(r.clone());
        });
        let mut sessions = store.sessions.lock().expect("session store lock");
        if let Some(s) = sessions.get_mut(&id) {
            match outcome {
                Ok(result) => {
                    s.result = Some(result);
                    s.transition(SessionState::Done);
                }
                Err(e) => {
                    s.error = Some(e.to_string());
                    s.transition(SessionState::Failed);
                }
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(body)))
}

async fn get_result(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> Result<Response, ApiError> {
    app.with_session(&id, |s| {
        if matches!(s.state, SessionState::Loaded | SessionState::Seeded) {
            return Err(ApiError::in_state(StatusCode::CONFLICT, "session has not been run", s.state));
        }
        let rows = s.rows();
        match q.format.as_deref() {
            None | Some("json") => Ok(Json(ResultView {
                id: id.clone(),
                state: s.state,
                progress: Progress {
                    completed: rows.len(),
                    total: s.frames.len(),
                },
                rows: rows.iter().enumerate().map(|(i, r)| ResultRow::new(i, r)).collect(),
                error: s.error.clone(),
            })
            .into_response()),
            Some("csv") => {
                let partial = TrackResult {
                    per_frame: rows,
                    seed: s.seed.expect("run sessions have a seed"),
                    config: s.config.engine,
                };
                let csv = track_csv_string(s.result.as_ref().unwrap_or(&partial));
                let state = format!("{:?}", s.state).to_lowercase();
                Ok(([(header::CONTENT_TYPE, "text/csv".to_string()), (header::HeaderName::from_static("x-session-state"), state)], csv)
                    .into_response())
            }
            Some(other) => Err(ApiError::in_state(
                StatusCode::BAD_REQUEST,
                format!("unknown result format `{other}`"),
                s.state,
            )),
        }
    })
}

async fn get_overlay(State(app): State<AppState>, Path((id, k)): Path<(String, usize)>) -> Result<Response, ApiError> {
    let img = app.with_session(&id, |s| {
        let frame = frame_of(s, k)?;
        let row = s.rows().get(k).cloned().ok_or_else(|| {
            ApiError::in_state(StatusCode::CONFLICT, format!("frame {k} has not been tracked yet"), s.state)
        })?;
        Ok(render_overlay(frame, &row.circle))
    })?;
    Ok(png(img))
}

/// The service routes, optionally serving a static UI directory at `/`.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/frames/{k}", get(get_frame))
        .route("/sessions/{id}/seed", post(seed_session))
        .route("/sessions/{id}/run", post(run_session))
        .route("/sessions/{id}/result", get(get_result))
        .route("/sessions/{id}/overlay/{k}", get(get_overlay))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(), static_dir)).await
}
