//! HTTP/stream API over one simulated world.
//!
//! - `GET /scene` scene JSON
//! - `GET /view` current frame as PPM
//! - `GET /mask?prompt=` provider output for the current frame as PFM
//! - `POST /session` `{prompt, kinds[], provider?}` → `{session_id}`
//! - `GET /session/{id}`, `POST /session/{id}/abort`
//! - `GET /session/{id}/telemetry` NDJSON, one trace line per step
//!
//! Sessions run on their own thread and own a copy of the world; after every
//! step they publish the new joint state back to the shared snapshot. At most
//! one session runs at a time.

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use servobench_core::geometry::ConstraintKind;
use servobench_core::TraceEntry;
use servobench_sim::{Scene, SimWorld};
use tokio::sync::broadcast;

use crate::error::HarnessError;
use crate::session::{run_session, Outcome, OverlayConstraint, SessionObserver, StepEvent};
use crate::settings::Settings;

const TELEMETRY_CAPACITY: usize = 256;

pub struct AppState {
    world: RwLock<SimWorld>,
    settings: Settings,
    registry: Mutex<Registry>,
}

#[derive(Default)]
struct Registry {
    next_id: u64,
    running: Option<u64>,
    sessions: HashMap<u64, Arc<SessionShared>>,
    /// Prompt of the latest finished session and its attempt number, if it failed.
    last_failed: Option<(String, u32)>,
}

struct SessionShared {
    id: u64,
    prompt: String,
    kinds: Vec<ConstraintKind>,
    provider: String,
    attempt: u32,
    abort: AtomicBool,
    inner: Mutex<SessionInner>,
}

struct SessionInner {
    step: u64,
    e_norm: Option<f64>,
    last_status: String,
    outcome: Option<Outcome>,
    success: Option<bool>,
    history: Vec<Arc<StepEvent>>,
    tx: Option<broadcast::Sender<Arc<StepEvent>>>,
}

#[derive(Serialize)]
struct TelemetryLine<'a> {
    #[serde(flatten)]
    entry: &'a TraceEntry,
    attempt: u32,
    overlay: &'a [OverlayConstraint],
    dropped: u64,
}

fn telemetry_line(ev: &StepEvent, dropped: u64) -> Bytes {
    let mut s = serde_json::to_string(&TelemetryLine {
        entry: &ev.entry,
        attempt: ev.attempt,
        overlay: &ev.overlay,
        dropped,
    })
    .expect("telemetry serializes");
    s.push('\n');
    Bytes::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: u64,
    pub prompt: String,
    pub kinds: Vec<ConstraintKind>,
    pub provider: String,
    pub attempt: u32,
    /// Servo status while running; the outcome label once finished.
    pub status: String,
    pub running: bool,
    pub step: u64,
    pub e_norm: Option<f64>,
    pub detail: Option<String>,
    pub success: Option<bool>,
}

impl SessionShared {
    fn view(&self) -> SessionView {
        let inner = self.inner.lock().unwrap();
        let detail = match &inner.outcome {
            Some(Outcome::PerceptionTimeout(m)) | Some(Outcome::Failed(m)) => Some(m.clone()),
            _ => None,
        };
        SessionView {
            session_id: self.id,
            prompt: self.prompt.clone(),
            kinds: self.kinds.clone(),
            provider: self.provider.clone(),
            attempt: self.attempt,
            status: match &inner.outcome {
                Some(o) => o.label().to_string(),
                None => inner.last_status.clone(),
            },
            running: inner.outcome.is_none(),
            step: inner.step,
            e_norm: inner.e_norm,
            detail,
            success: inner.success,
        }
    }
}

struct Publisher {
    app: Arc<AppState>,
    shared: Arc<SessionShared>,
}

impl SessionObserver for Publisher {
    fn on_step(&mut self, event: &StepEvent, world: &SimWorld) {
        *self.app.world.write().unwrap() = world.clone();
        let ev = Arc::new(event.clone());
        let mut inner = self.shared.inner.lock().unwrap();
        inner.step = ev.entry.step;
        inner.e_norm = Some(ev.entry.e_norm);
        inner.last_status = format!("{:?}", ev.entry.status);
        inner.history.push(Arc::clone(&ev));
        if let Some(tx) = &inner.tx {
            // No receivers is fine; late subscribers replay the history.
            let _ = tx.send(ev);
        }
    }

    fn aborted(&self) -> bool {
        self.shared.abort.load(Ordering::Relaxed)
    }
}

impl AppState {
    pub fn new(scene: Scene, settings: Settings) -> Result<Arc<Self>, HarnessError> {
        settings.validate()?;
        Ok(Arc::new(Self {
            world: RwLock::new(SimWorld::new(scene)?),
            settings,
            registry: Mutex::new(Registry::default()),
        }))
    }

    fn snapshot(&self) -> SimWorld {
        self.world.read().unwrap().clone()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn get_scene(State(app): State<Arc<AppState>>) -> Response {
    let body = app.snapshot().scene().to_json_pretty();
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn get_view(State(app): State<Arc<AppState>>) -> Response {
    let world = app.snapshot();
    match tokio::task::spawn_blocking(move || world.render_view().to_ppm_bytes()).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/x-portable-pixmap")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_mask(State(app): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(prompt) = q.get("prompt").cloned() else {
        return error(StatusCode::BAD_REQUEST, "missing `prompt` query parameter");
    };
    let spec = match app.settings.provider_spec() {
        Ok(s) => s,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let world = app.snapshot();
    let job = tokio::task::spawn_blocking(move || spec.build().provide(&world.render_frame(), &prompt));
    match job.await {
        Ok(Ok(map)) => ([(header::CONTENT_TYPE, "application/x-pfm")], map.to_pfm_bytes()).into_response(),
        Ok(Err(e)) => error(StatusCode::BAD_GATEWAY, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartRequest {
    prompt: String,
    kinds: Vec<String>,
    #[serde(default)]
    provider: Option<String>,
}

async fn start_session(State(app): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: StartRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    if req.prompt.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "prompt is empty");
    }
    if req.kinds.is_empty() {
        return error(StatusCode::BAD_REQUEST, "kinds is empty");
    }
    let kinds = match req.kinds.iter().map(|k| k.parse::<ConstraintKind>()).collect::<Result<Vec<_>, _>>() {
        Ok(k) => k,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let mut settings = app.settings.clone();
    if let Some(p) = &req.provider {
        settings.provider = p.clone();
    }
    // A bare `corrupt` picks up the configured profile and seed.
    let spec = match settings.provider_spec() {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };

    let shared = {
        let mut reg = app.registry.lock().unwrap();
        if let Some(id) = reg.running {
            return error(StatusCode::CONFLICT, format!("session {id} is already running"));
        }
        reg.next_id += 1;
        let id = reg.next_id;
        let attempt = match &reg.last_failed {
            Some((p, n)) if *p == req.prompt && *n < app.settings.session.max_attempts => n + 1,
            _ => 1,
        };
        let (tx, _) = broadcast::channel(TELEMETRY_CAPACITY);
        let shared = Arc::new(SessionShared {
            id,
            prompt: req.prompt.clone(),
            kinds: kinds.clone(),
            provider: spec.to_string(),
            attempt,
            abort: AtomicBool::new(false),
            inner: Mutex::new(SessionInner {
                step: 0,
                e_norm: None,
                last_status: "Initializing".into(),
                outcome: None,
                success: None,
                history: Vec::new(),
                tx: Some(tx),
            }),
        });
        reg.running = Some(id);
        reg.sessions.insert(id, Arc::clone(&shared));
        shared
    };

    app.world.write().unwrap().reset();
    let (app2, shared2) = (Arc::clone(&app), Arc::clone(&shared));
    std::thread::spawn(move || {
        let mut world = app2.snapshot();
        let provider = spec.build();
        let mut cfg = app2.settings.session.clone();
        cfg.throttle = true;
        let mut obs = Publisher {
            app: Arc::clone(&app2),
            shared: Arc::clone(&shared2),
        };
        let report = run_session(&mut world, &shared2.prompt, &shared2.kinds, provider.as_ref(), &cfg, shared2.attempt, &mut obs);
        *app2.world.write().unwrap() = world;
        let mut reg = app2.registry.lock().unwrap();
        {
            let mut inner = shared2.inner.lock().unwrap();
            inner.success = Some(report.grasped);
            inner.outcome = Some(report.outcome.clone());
            inner.tx = None;
        }
        reg.running = None;
        reg.last_failed = (!report.grasped && report.outcome != Outcome::Aborted).then(|| (shared2.prompt.clone(), shared2.attempt));
    });
    Json(json!({ "session_id": shared.id })).into_response()
}

fn lookup(app: &AppState, id: u64) -> Result<Arc<SessionShared>, Response> {
    app.registry
        .lock()
        .unwrap()
        .sessions
        .get(&id)
        .cloned()
        .ok_or_else(|| error(StatusCode::NOT_FOUND, format!("no session {id}")))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match lookup(&app, id) {
        Ok(s) => Json(s.view()).into_response(),
        Err(r) => r,
    }
}

async fn abort_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match lookup(&app, id) {
        Ok(s) => {
            s.abort.store(true, Ordering::Relaxed);
            Json(s.view()).into_response()
        }
        Err(r) => r,
    }
}

struct Feed {
    replay: VecDeque<Arc<StepEvent>>,
    rx: Option<broadcast::Receiver<Arc<StepEvent>>>,
    dropped: u64,
}

async fn telemetry(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    let shared = match lookup(&app, id) {
        Ok(s) => s,
        Err(r) => return r,
    };
    let feed = {
        let inner = shared.inner.lock().unwrap();
        Feed {
            replay: inner.history.iter().cloned().collect(),
            rx: inner.tx.as_ref().map(|t| t.subscribe()),
            dropped: 0,
        }
    };
    let stream = futures::stream::unfold(feed, |mut f| async move {
        if let Some(ev) = f.replay.pop_front() {
            let line = telemetry_line(&ev, f.dropped);
            return Some((Ok::<_, Infallible>(line), f));
        }
        let mut rx = f.rx.take()?;
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let line = telemetry_line(&ev, f.dropped);
                    f.rx = Some(rx);
                    return Some((Ok(line), f));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => f.dropped += n,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response()
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/view", get(get_view))
        .route("/mask", get(get_mask))
        .route("/session", post(start_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/abort", post(abort_session))
        .route("/session/{id}/telemetry", get(telemetry))
        .with_state(app)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await
}

pub async fn bind(addr: &str) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let l = tokio::net::TcpListener::bind(addr).await?;
    let a = l.local_addr()?;
    Ok((l, a))
}
