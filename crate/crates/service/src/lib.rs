//! HTTP session service: pose ingest, utterance turns and an ordered event
//! stream per session.
//!
//! Routes:
//!
//! | method | path | body / query | reply |
//! |---|---|---|---|
//! | GET | `/health` | | `{"status": "ok"}` |
//! | GET | `/scenarios` | | built-in scenario ids |
//! | POST | `/sessions` | [`CreateSessionRequest`] | [`CreateSessionResponse`] |
//! | POST | `/sessions/{id}/poses` | [`PoseBatch`] | [`PoseAck`] |
//! | POST | `/sessions/{id}/utterances` | [`UtteranceRequest`] | turn transcript |
//! | GET | `/sessions/{id}/events?from_seq=N` | | server-sent events |
//! | GET | `/sessions/{id}/events/poll?from_seq=N` | | `{"events": [...], "next_seq": M}` |
//! | GET | `/sessions/{id}/transcript` | | all turn transcripts |
//!
//! Each SSE message has `id` = sequence number, `event` = kind and a JSON
//! [`SessionEvent`] as data. Clients resume with `from_seq` (or
//! `Last-Event-ID`) and drop duplicates by sequence number.

pub mod api;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use gazeground_core::agent::{
    build_tool_registry, AgentConfig, AgentSession, Backend, ReplayBackend, TurnTranscript,
};
use gazeground_core::eval::{builtin_scenario, EvalCondition, SCENARIO_IDS};
use gazeground_core::geometry::SceneRanker;
use gazeground_core::io::SceneFile;
use gazeground_core::segmentation::SegmentationParams;
use serde_json::{json, Value};
use tokio::sync::broadcast;

pub use api::{
    ApiError, CreateSessionRequest, CreateSessionResponse, EventQuery, PoseAck, PoseBatch, PoseInput,
    UtteranceRequest,
};
pub use session::{EventKind, EventLog, IngestError, Session, SessionEvent, SessionSetup, TurnError};

pub const DEFAULT_LOOKBACK_MS: f64 = 1000.0;

/// Server-wide defaults; sessions may override most of them.
#[derive(Clone)]
pub struct ServiceConfig {
    /// Backends sessions may select by name. Build them outside the async
    /// runtime: the remote backend uses a blocking HTTP client.
    pub backends: BTreeMap<String, Arc<dyn Backend>>,
    pub default_backend: String,
    pub params: SegmentationParams,
    pub condition: EvalCondition,
    pub actions_enabled: bool,
    pub agent: AgentConfig,
    pub lookback_ms: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let heuristic: Arc<dyn Backend> = Arc::new(gazeground_core::agent::HeuristicBackend::default());
        Self {
            backends: BTreeMap::from([("heuristic".to_string(), heuristic)]),
            default_backend: "heuristic".into(),
            params: SegmentationParams::default(),
            condition: EvalCondition::FULL,
            actions_enabled: true,
            agent: AgentConfig::default(),
            lookback_ms: DEFAULT_LOOKBACK_MS,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Creates and registers a session; event 0 is `session_created`.
    pub fn create_session(&self, req: CreateSessionRequest) -> Result<Arc<Session>, ApiError> {
        let unprocessable = |code, msg: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, msg);
        let (scene, viewer) = match (req.scene, req.scenario.as_deref()) {
            (Some(file), _) => file
                .into_scene("request.scene")
                .map_err(|e| unprocessable("invalid_scene", e.to_string()))?,
            (None, name) => {
                let s = builtin_scenario(name.unwrap_or("breakfast")).map_err(|e| {
                    ApiError::new(StatusCode::NOT_FOUND, "unknown_scenario", e.to_string())
                        .with_details(json!({ "available": SCENARIO_IDS }))
                })?;
                (s.scene, Some(s.viewer))
            }
        };
        let params = req.params.unwrap_or(self.config.params);
        params
            .validate()
            .map_err(|e| unprocessable("invalid_params", e.to_string()))?;
        let ranker = SceneRanker::new(&scene, params.sample_spacing_mm)
            .map_err(|e| unprocessable("invalid_scene", e.to_string()))?;
        let (backend_name, backend): (String, Arc<dyn Backend>) = match (req.replay_script, req.backend) {
            (Some(script), _) => ("replay".into(), Arc::new(ReplayBackend::new(script))),
            (None, name) => {
                let name = name.unwrap_or_else(|| self.config.default_backend.clone());
                let backend = self.config.backends.get(&name).cloned().ok_or_else(|| {
                    unprocessable("unknown_backend", format!("backend {name:?} is not available"))
                        .with_details(json!({ "available": self.config.backends.keys().collect::<Vec<_>>() }))
                })?;
                (name, backend)
            }
        };
        let lookback_ms = req.lookback_ms.unwrap_or(self.config.lookback_ms);
        if !(lookback_ms >= 0.0 && lookback_ms.is_finite()) {
            return Err(unprocessable("invalid_request", format!("lookback_ms must be >= 0, got {lookback_ms}")));
        }
        let condition = EvalCondition {
            scene_query_enabled: req.scene_query_enabled.unwrap_or(self.config.condition.scene_query_enabled),
        };
        let actions_enabled = req.actions_enabled.unwrap_or(self.config.actions_enabled);
        let agent = AgentSession::new(
            scene.clone(),
            build_tool_registry(condition, actions_enabled),
            backend,
            self.config.agent.clone(),
        );
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let session = Session::new(SessionSetup {
            id: id.clone(),
            scene,
            viewer,
            params,
            scene_query_enabled: condition.scene_query_enabled,
            actions_enabled,
            backend_name,
            lookback_ms,
            ranker,
            agent,
        });
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, session.clone());
        Ok(session)
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn scenarios() -> Json<Value> {
    Json(json!({ "scenarios": SCENARIO_IDS }))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<Json<CreateSessionResponse>, ApiError> {
    let session = state.create_session(body(payload)?)?;
    Ok(Json(CreateSessionResponse {
        session_id: session.id.clone(),
        scene: SceneFile::from_scene(&session.scene, session.viewer),
        params: session.params,
        scene_query_enabled: session.scene_query_enabled,
        actions_enabled: session.actions_enabled,
        backend: session.backend_name.clone(),
    }))
}

async fn ingest_poses(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<PoseBatch>, JsonRejection>,
) -> Result<Json<PoseAck>, ApiError> {
    let session = state.session(&id)?;
    let batch = body(payload)?;
    // Ranking is CPU work; keep it off the async workers.
    let s = session.clone();
    let result = tokio::task::spawn_blocking(move || s.ingest(&batch.samples))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    match result {
        Ok(accepted) => Ok(Json(PoseAck {
            accepted,
            last_accepted_ms: session.last_accepted_ms(),
        })),
        Err(IngestError::Stale {
            index,
            t,
            last_accepted_ms,
        }) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale_timestamp",
            format!("sample {index} at t={t} is not after the last accepted timestamp"),
        )
        .with_details(json!({"index": index, "last_accepted_ms": last_accepted_ms}))),
        Err(IngestError::InvalidPose { index, message }) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_pose",
            format!("sample {index}: {message}"),
        )
        .with_details(json!({ "index": index }))),
    }
}

fn turn_error(e: TurnError) -> ApiError {
    match e {
        TurnError::Busy => ApiError::new(StatusCode::CONFLICT, "session_busy", "a turn is already in progress"),
        TurnError::InvalidUtterance(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_utterance", m),
    }
}

async fn submit_utterance(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<UtteranceRequest>, JsonRejection>,
) -> Result<Json<TurnTranscript>, ApiError> {
    let session = state.session(&id)?;
    let req = body(payload)?;
    let guard = session.begin_turn().map_err(turn_error)?;
    let utterance = session.resolve_utterance(&req).map_err(turn_error)?;
    let scanpath = session.scanpath(utterance).map_err(turn_error)?;
    // The guard travels with the turn, so a dropped client connection does
    // not release the session while the agent is still running.
    let s = session.clone();
    let transcript = tokio::task::spawn_blocking(move || s.run_turn(guard, scanpath))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(Json(transcript))
}

async fn transcript(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Vec<TurnTranscript>>, ApiError> {
    Ok(Json(state.session(&id)?.transcripts()))
}

async fn poll_events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let events = session.events.since(q.from_seq);
    let next_seq = events.last().map_or(q.from_seq.max(0), |e| e.seq + 1);
    Ok(Json(json!({"events": events, "next_seq": next_seq})))
}

fn sse_event(e: &SessionEvent) -> Event {
    Event::default()
        .id(e.seq.to_string())
        .event(e.kind.name())
        .data(serde_json::to_string(e).expect("event serializes"))
}

/// Backlog from `from_seq`, then live events. A lagging receiver falls back
/// to the log, so subscribers never see gaps.
fn event_stream(session: Arc<Session>, from_seq: u64) -> impl Stream<Item = Result<Event, Infallible>> {
    struct Cursor {
        session: Arc<Session>,
        rx: broadcast::Receiver<SessionEvent>,
        pending: std::vec::IntoIter<SessionEvent>,
        next: u64,
    }
    // Subscribe before reading the backlog so nothing falls in between.
    let rx = session.events.subscribe();
    let pending = session.events.since(from_seq).into_iter();
    let cursor = Cursor {
        session,
        rx,
        pending,
        next: from_seq,
    };
    futures::stream::unfold(cursor, |mut c| async move {
        loop {
            if let Some(e) = c.pending.next() {
                if e.seq < c.next {
                    continue;
                }
                c.next = e.seq + 1;
                return Some((Ok(sse_event(&e)), c));
            }
            match c.rx.recv().await {
                Ok(e) if e.seq < c.next => continue,
                Ok(e) if e.seq == c.next => {
                    c.next += 1;
                    return Some((Ok(sse_event(&e)), c));
                }
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => {
                    c.pending = c.session.events.since(c.next).into_iter();
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

async fn subscribe_events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session = state.session(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|last| last + 1);
    let from = resume.map_or(q.from_seq, |r| r.max(q.from_seq));
    Ok(Sse::new(event_stream(session, from)).keep_alive(KeepAlive::default()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenarios", get(scenarios))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/poses", post(ingest_poses))
        .route("/sessions/{id}/utterances", post(submit_utterance))
        .route("/sessions/{id}/events", get(subscribe_events))
        .route("/sessions/{id}/events/poll", get(poll_events))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(state)
}

/// Serves until `shutdown` resolves; in-flight requests, including running
/// turns, complete first.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
