//! Tool-using agent that turns a semantic scanpath into robot behaviour.

mod backend;
mod prompt;
mod remote;
mod runtime;
mod scripted;
mod state;
mod tools;

pub use backend::{
    Arguments, Backend, BackendError, CompletionRequest, CompletionResponse, Message, ToolCall, ToolResult,
    DEFAULT_TEMPERATURE, RAW_ARGUMENTS_KEY,
};
pub use prompt::{default_system_prompt, SystemPromptConfig, DEFAULT_ROBOT_NAME, GAZE_TIPS, RULES};
pub use remote::{parse_response, request_body, RemoteBackend, RemoteConfig, DEFAULT_BASE_URL, DEFAULT_REMOTE_MODEL};
pub use runtime::{
    AgentConfig, AgentSession, AgentTurn, CancelHandle, ToolExchange, TurnEvent, TurnStatus, TurnTranscript,
    DEFAULT_MAX_BACKEND_RETRIES, DEFAULT_MAX_ITERATIONS,
};
pub use scripted::{
    dwell_scores, HeuristicBackend, HeuristicConfig, ReplayBackend, ReplayScript, ScriptedCall, ScriptedResponse,
};
pub use state::{ActionError, ExecutedAction, Location, SimulatedSceneState};
pub use tools::{build_tool_registry, RegistryError, SpokenReply, ToolClass, ToolKind, ToolParam, ToolRegistry, ToolSpec};

/// Builds the backend named on the command line: `heuristic`, `replay`
/// (needs a script) or `remote`.
pub fn backend_from_name(name: &str, script: Option<ReplayScript>) -> Result<std::sync::Arc<dyn Backend>, BackendError> {
    match name {
        "heuristic" | "scripted" => Ok(std::sync::Arc::new(HeuristicBackend::default())),
        "replay" => script
            .map(|s| std::sync::Arc::new(ReplayBackend::new(s)) as std::sync::Arc<dyn Backend>)
            .ok_or_else(|| BackendError::Config("the replay backend needs a script file".into())),
        "remote" => Ok(std::sync::Arc::new(RemoteBackend::from_env()?)),
        other => Err(BackendError::Config(format!(
            "unknown backend {other:?} (expected heuristic, replay or remote)"
        ))),
    }
}
