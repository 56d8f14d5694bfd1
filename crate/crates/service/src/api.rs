//! Wire types and error codes.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gazeground_core::agent::ReplayScript;
use gazeground_core::geometry::Vec3;
use gazeground_core::io::SceneFile;
use gazeground_core::scanpath::Word;
use gazeground_core::segmentation::{SegmentationParams, TimeWindow};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    /// Built-in scenario whose scene to use; ignored when `scene` is given.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub scene: Option<SceneFile>,
    #[serde(default)]
    pub params: Option<SegmentationParams>,
    /// `true` (default) exposes query_objects to the agent.
    #[serde(default)]
    pub scene_query_enabled: Option<bool>,
    #[serde(default)]
    pub actions_enabled: Option<bool>,
    /// One of the backends the server was started with.
    #[serde(default)]
    pub backend: Option<String>,
    /// Inline script; selects the replay backend for this session.
    #[serde(default)]
    pub replay_script: Option<ReplayScript>,
    #[serde(default)]
    pub lookback_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub scene: SceneFile,
    pub params: SegmentationParams,
    pub scene_query_enabled: bool,
    pub actions_enabled: bool,
    pub backend: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseInput {
    pub t: f64,
    pub origin: Vec3,
    pub forward: Vec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseBatch {
    pub samples: Vec<PoseInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseAck {
    pub accepted: usize,
    pub last_accepted_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRequest {
    pub text: String,
    #[serde(default)]
    pub words: Option<Vec<Word>>,
    /// Explicit turn window; otherwise [speech start - lookback, submission].
    #[serde(default)]
    pub turn_window: Option<TimeWindow>,
    /// Speech start when no word timestamps are sent.
    #[serde(default)]
    pub started_at_ms: Option<f64>,
    /// Defaults to the last accepted pose timestamp.
    #[serde(default)]
    pub submitted_at_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventQuery {
    #[serde(default)]
    pub from_seq: u64,
}

/// Error body: `{"error": {"code": ..., "message": ..., ...details}}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({"code": self.code, "message": self.message});
        if let Some(Value::Object(extra)) = self.details {
            error.as_object_mut().expect("object").extend(extra);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}
