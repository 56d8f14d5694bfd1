use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use gazeground_core::agent::{AgentSession, TurnEvent, TurnTranscript};
use gazeground_core::geometry::{HeadPoseSample, Scene, SceneRanker, Vec3};
use gazeground_core::scanpath::{render_prompt_text, scanpath_from_poses, SemanticScanpath, Utterance};
use gazeground_core::segmentation::{SegmentationParams, SegmenterEvent, StreamingSegmenter, TimeWindow};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use crate::api::{PoseInput, UtteranceRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated,
    PoseAccepted,
    RankedFrame,
    SegmentOpened,
    SegmentClosed,
    TurnStarted,
    ToolCall,
    ToolResult,
    Speak,
    TurnCompleted,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::SessionCreated => "session_created",
            EventKind::PoseAccepted => "pose_accepted",
            EventKind::RankedFrame => "ranked_frame",
            EventKind::SegmentOpened => "segment_opened",
            EventKind::SegmentClosed => "segment_closed",
            EventKind::TurnStarted => "turn_started",
            EventKind::ToolCall => "tool_call",
            EventKind::ToolResult => "tool_result",
            EventKind::Speak => "speak",
            EventKind::TurnCompleted => "turn_completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub data: Value,
}

/// Append-only log with live fan-out. Sequence numbers are assigned under
/// the log lock, so they are contiguous and match broadcast order.
pub struct EventLog {
    events: Mutex<Vec<SessionEvent>>,
    tx: broadcast::Sender<SessionEvent>,
}

impl EventLog {
    fn new() -> Self {
        Self {
            events: Mutex::new(Vec::new()),
            tx: broadcast::channel(1024).0,
        }
    }

    pub fn emit(&self, kind: EventKind, data: Value) -> u64 {
        let mut events = lock(&self.events);
        let event = SessionEvent {
            seq: events.len() as u64,
            kind,
            data,
        };
        let seq = event.seq;
        // No receivers is fine.
        let _ = self.tx.send(event.clone());
        events.push(event);
        seq
    }

    pub fn since(&self, from_seq: u64) -> Vec<SessionEvent> {
        let events = lock(&self.events);
        events.get(from_seq as usize..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn len(&self) -> u64 {
        lock(&self.events).len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subscribe(&self) -> broadcast::Receiver<SessionEvent> {
        self.tx.subscribe()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct LiveState {
    poses: Vec<HeadPoseSample>,
    segmenter: StreamingSegmenter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestError {
    Stale { index: usize, t: f64, last_accepted_ms: Option<f64> },
    InvalidPose { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurnError {
    Busy,
    InvalidUtterance(String),
}

pub struct Session {
    pub id: String,
    pub scene: Scene,
    pub viewer: Option<Vec3>,
    pub params: SegmentationParams,
    pub scene_query_enabled: bool,
    pub actions_enabled: bool,
    pub backend_name: String,
    pub lookback_ms: f64,
    ranker: SceneRanker,
    live: Mutex<LiveState>,
    pub events: EventLog,
    agent: Mutex<AgentSession>,
    busy: AtomicBool,
    transcripts: Mutex<Vec<TurnTranscript>>,
}

/// Clears the busy flag when the turn ends, however it ends.
pub struct TurnGuard(Arc<Session>);

impl Drop for TurnGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::SeqCst);
    }
}

pub struct SessionSetup {
    pub id: String,
    pub scene: Scene,
    pub viewer: Option<Vec3>,
    pub params: SegmentationParams,
    pub scene_query_enabled: bool,
    pub actions_enabled: bool,
    pub backend_name: String,
    pub lookback_ms: f64,
    pub ranker: SceneRanker,
    pub agent: AgentSession,
}

impl Session {
    pub fn new(setup: SessionSetup) -> Arc<Self> {
        let session = Arc::new(Self {
            id: setup.id,
            scene: setup.scene,
            viewer: setup.viewer,
            params: setup.params,
            scene_query_enabled: setup.scene_query_enabled,
            actions_enabled: setup.actions_enabled,
            backend_name: setup.backend_name,
            lookback_ms: setup.lookback_ms,
            ranker: setup.ranker,
            live: Mutex::new(LiveState {
                poses: Vec::new(),
                segmenter: StreamingSegmenter::new(setup.params),
            }),
            events: EventLog::new(),
            agent: Mutex::new(setup.agent),
            busy: AtomicBool::new(false),
            transcripts: Mutex::new(Vec::new()),
        });
        session.events.emit(
            EventKind::SessionCreated,
            json!({
                "session_id": session.id,
                "scene": session.scene.name,
                "objects": session.scene.ids().collect::<Vec<_>>(),
                "scene_query_enabled": session.scene_query_enabled,
                "actions_enabled": session.actions_enabled,
                "backend": session.backend_name,
            }),
        );
        session
    }

    pub fn last_accepted_ms(&self) -> Option<f64> {
        lock(&self.live).poses.last().map(|p| p.timestamp_ms)
    }

    /// Validates the whole batch before accepting any of it, then ranks each
    /// pose and advances the live segmenter.
    pub fn ingest(&self, batch: &[PoseInput]) -> Result<usize, IngestError> {
        let mut live = lock(&self.live);
        let mut last = live.poses.last().map(|p| p.timestamp_ms);
        let mut poses = Vec::with_capacity(batch.len());
        for (index, s) in batch.iter().enumerate() {
            if let Some(prev) = last {
                if !(s.t > prev) {
                    return Err(IngestError::Stale {
                        index,
                        t: s.t,
                        last_accepted_ms: live.poses.last().map(|p| p.timestamp_ms),
                    });
                }
            }
            let pose = HeadPoseSample::new(s.t, s.origin, s.forward).map_err(|e| IngestError::InvalidPose {
                index,
                message: e.to_string(),
            })?;
            let frame = self.ranker.rank(&pose).map_err(|e| IngestError::InvalidPose {
                index,
                message: e.to_string(),
            })?;
            last = Some(s.t);
            poses.push((pose, frame));
        }
        for (pose, frame) in &poses {
            self.events.emit(EventKind::PoseAccepted, json!({"t": pose.timestamp_ms}));
            self.events.emit(
                EventKind::RankedFrame,
                json!({"t": frame.timestamp_ms, "entries": frame.entries}),
            );
            let seg_events = live
                .segmenter
                .push(pose, frame)
                .expect("timestamps checked above");
            for e in seg_events {
                self.emit_segment_event(e);
            }
            live.poses.push(*pose);
        }
        Ok(poses.len())
    }

    fn emit_segment_event(&self, e: SegmenterEvent) {
        match e {
            SegmenterEvent::Opened { object_ids, start_ms } => self.events.emit(
                EventKind::SegmentOpened,
                json!({"object_ids": object_ids, "start_ms": start_ms}),
            ),
            SegmenterEvent::Closed { segment } => self
                .events
                .emit(EventKind::SegmentClosed, json!({ "segment": segment })),
        };
    }

    /// Claims the session for one turn.
    pub fn begin_turn(self: &Arc<Self>) -> Result<TurnGuard, TurnError> {
        if self.busy.swap(true, Ordering::SeqCst) {
            return Err(TurnError::Busy);
        }
        Ok(TurnGuard(self.clone()))
    }

    /// Turn window and utterance for a request: the explicit window, or
    /// [speech start - lookback, submission time].
    pub fn resolve_utterance(&self, req: &UtteranceRequest) -> Result<Utterance, TurnError> {
        let window = match req.turn_window {
            Some(w) => w,
            None => {
                let last = self.last_accepted_ms();
                let word_start = req.words.as_ref().and_then(|w| w.first()).map(|w| w.start_ms);
                let word_end = req.words.as_ref().and_then(|w| w.last()).map(|w| w.end_ms);
                let latest = match (last, word_end) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                let submitted = req.submitted_at_ms.or(latest).unwrap_or(0.0);
                let start = word_start.or(req.started_at_ms).unwrap_or(submitted);
                TimeWindow::new(start - self.lookback_ms, submitted.max(start))
            }
        };
        if !(window.start_ms.is_finite() && window.end_ms.is_finite() && window.start_ms <= window.end_ms) {
            return Err(TurnError::InvalidUtterance(format!(
                "invalid turn window [{}, {}]",
                window.start_ms, window.end_ms
            )));
        }
        let mut utterance = Utterance::new(req.text.clone(), window);
        utterance.words = req.words.clone();
        utterance
            .validate()
            .map_err(|e| TurnError::InvalidUtterance(e.to_string()))?;
        Ok(utterance)
    }

    /// Scanpath over the stored poses; identical to the offline pipeline.
    pub fn scanpath(&self, utterance: Utterance) -> Result<SemanticScanpath, TurnError> {
        let live = lock(&self.live);
        scanpath_from_poses(&self.ranker, &live.poses, utterance, &self.params)
            .map_err(|e| TurnError::InvalidUtterance(e.to_string()))
    }

    /// Runs the agent. Blocking: call from a blocking-capable thread.
    pub fn run_turn(&self, guard: TurnGuard, scanpath: SemanticScanpath) -> TurnTranscript {
        let turn_index = lock(&self.transcripts).len();
        let input = render_prompt_text(&scanpath);
        self.events.emit(
            EventKind::TurnStarted,
            json!({"turn_index": turn_index, "turn_window": scanpath.utterance.turn_window, "input": input}),
        );
        let mut agent = lock(&self.agent);
        let turn = agent.run_turn_text(&input, &mut |e| match e {
            TurnEvent::ToolCall(call) => {
                self.events
                    .emit(EventKind::ToolCall, json!({"turn_index": turn_index, "call": call}));
            }
            TurnEvent::ToolResult(result) => {
                self.events
                    .emit(EventKind::ToolResult, json!({"turn_index": turn_index, "result": result}));
            }
            TurnEvent::Speak(reply) => {
                self.events.emit(
                    EventKind::Speak,
                    json!({"turn_index": turn_index, "person_name": reply.person_name, "text": reply.text}),
                );
            }
        });
        let actions = agent.state().actions().to_vec();
        drop(agent);
        self.events.emit(
            EventKind::TurnCompleted,
            json!({
                "turn_index": turn_index,
                "status": turn.status,
                "required_objects": turn.required_objects,
                "final_message": turn.final_message,
                "error": turn.error,
                "actions": actions,
            }),
        );
        let transcript = TurnTranscript {
            turn_index,
            scanpath,
            turn,
        };
        lock(&self.transcripts).push(transcript.clone());
        drop(guard);
        transcript
    }

    pub fn transcripts(&self) -> Vec<TurnTranscript> {
        lock(&self.transcripts).clone()
    }
}
