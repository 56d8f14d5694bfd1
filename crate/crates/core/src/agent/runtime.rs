use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backend::{
    Backend, BackendError, CompletionRequest, Message, ToolCall, ToolResult, DEFAULT_TEMPERATURE,
};
use super::prompt::SystemPromptConfig;
use super::state::SimulatedSceneState;
use super::tools::{dispatch, DispatchOutcome, SpokenReply, ToolRegistry, TurnNotes};
use crate::geometry::Scene;
use crate::scanpath::{render_prompt_text, SemanticScanpath};

pub const DEFAULT_MAX_ITERATIONS: usize = 16;
pub const DEFAULT_MAX_BACKEND_RETRIES: u32 = 2;
/// Rejected calls (unknown tool, bad arguments) tolerated per turn before
/// the turn fails. The first one is fed back so the model can recover.
const MAX_REJECTED_CALLS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub model: String,
    pub temperature: f64,
    pub max_iterations: usize,
    pub max_backend_retries: u32,
    pub prompt: SystemPromptConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model: "scripted".to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_backend_retries: DEFAULT_MAX_BACKEND_RETRIES,
            prompt: SystemPromptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Completed,
    ClarificationRequested,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolExchange {
    /// Loop iteration (backend round trip) that produced the call. Serves
    /// as a logical timestamp so transcripts stay reproducible.
    pub iteration: usize,
    pub call: ToolCall,
    pub result: ToolResult,
}

/// Everything the agent did for one scanpath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    /// The prompt block sent as the user message.
    pub input: String,
    pub exchanges: Vec<ToolExchange>,
    pub reasoning: Vec<String>,
    pub required_objects: Option<Vec<String>>,
    pub spoken: Vec<SpokenReply>,
    pub final_message: Option<String>,
    pub status: TurnStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub backend_retries: u32,
    pub iterations: usize,
}

impl AgentTurn {
    /// A completed turn with a non-empty `required_objects` list.
    pub fn is_scoreable(&self) -> bool {
        self.status == TurnStatus::Completed
            && self.required_objects.as_ref().is_some_and(|r| !r.is_empty())
    }

    pub fn called(&self, tool: &str) -> bool {
        self.exchanges.iter().any(|e| e.call.name == tool)
    }

    pub fn tool_sequence(&self) -> Vec<&str> {
        self.exchanges.iter().map(|e| e.call.name.as_str()).collect()
    }
}

/// A turn together with the scanpath that prompted it; what the CLI and
/// the service both emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTranscript {
    pub turn_index: usize,
    pub scanpath: SemanticScanpath,
    pub turn: AgentTurn,
}

/// Progress notifications while a turn runs.
#[derive(Debug, Clone, PartialEq)]
pub enum TurnEvent<'a> {
    ToolCall(&'a ToolCall),
    ToolResult(&'a ToolResult),
    Speak(&'a SpokenReply),
}

#[derive(Debug, Clone, Default)]
pub struct CancelHandle(Arc<AtomicBool>);

impl CancelHandle {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    fn reset(&self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

/// One conversation with the agent. Turns run strictly one after another;
/// message history and the simulated scene persist across them.
pub struct AgentSession {
    scene: Scene,
    registry: ToolRegistry,
    backend: Arc<dyn Backend>,
    config: AgentConfig,
    state: SimulatedSceneState,
    history: Vec<Message>,
    cancel: CancelHandle,
}

impl std::fmt::Debug for AgentSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentSession")
            .field("scene", &self.scene.name)
            .field("tools", &self.registry.names())
            .field("backend", &self.backend.name())
            .field("messages", &self.history.len())
            .finish()
    }
}

impl AgentSession {
    pub fn new(scene: Scene, registry: ToolRegistry, backend: Arc<dyn Backend>, config: AgentConfig) -> Self {
        let state = SimulatedSceneState::from_scene(&scene);
        let history = vec![Message::System {
            content: config.prompt.render(),
        }];
        Self {
            scene,
            registry,
            backend,
            config,
            state,
            history,
            cancel: CancelHandle::default(),
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    pub fn state(&self) -> &SimulatedSceneState {
        &self.state
    }

    pub fn history(&self) -> &[Message] {
        &self.history
    }

    pub fn cancel_handle(&self) -> CancelHandle {
        self.cancel.clone()
    }

    pub fn run_turn(&mut self, scanpath: &SemanticScanpath) -> AgentTurn {
        self.run_turn_observed(scanpath, &mut |_| {})
    }

    pub fn run_turn_observed(
        &mut self,
        scanpath: &SemanticScanpath,
        observer: &mut dyn FnMut(TurnEvent<'_>),
    ) -> AgentTurn {
        self.run_turn_text(&render_prompt_text(scanpath), observer)
    }

    /// Runs a turn for an already rendered prompt block.
    pub fn run_turn_text(&mut self, input: &str, observer: &mut dyn FnMut(TurnEvent<'_>)) -> AgentTurn {
        self.cancel.reset();
        self.history.push(Message::User {
            content: input.to_string(),
        });
        let mut turn = AgentTurn {
            input: input.to_string(),
            exchanges: Vec::new(),
            reasoning: Vec::new(),
            required_objects: None,
            spoken: Vec::new(),
            final_message: None,
            status: TurnStatus::Completed,
            error: None,
            backend_retries: 0,
            iterations: 0,
        };
        let mut notes = TurnNotes::default();
        let mut rejected = 0usize;
        let specs = self.registry.specs();

        let outcome: Result<(), String> = 'turn: loop {
            if turn.iterations >= self.config.max_iterations {
                break Err(format!("iteration limit of {} reached", self.config.max_iterations));
            }
            if self.cancel.is_cancelled() {
                break Err("turn cancelled".to_string());
            }
            let iteration = turn.iterations;
            turn.iterations += 1;
            let request = CompletionRequest {
                model: self.config.model.clone(),
                temperature: self.config.temperature,
                messages: self.history.clone(),
                tools: specs.clone(),
            };
            let response = match self.complete_with_retries(&request, &mut turn.backend_retries) {
                Ok(r) => r,
                Err(e) => break Err(format!("{e} (after {} retries)", turn.backend_retries)),
            };
            if response.tool_calls.is_empty() {
                turn.final_message = response.content.clone();
                self.history.push(Message::Assistant {
                    content: response.content,
                    tool_calls: Vec::new(),
                });
                break Ok(());
            }
            self.history.push(Message::Assistant {
                content: response.content.clone(),
                tool_calls: response.tool_calls.clone(),
            });
            for call in &response.tool_calls {
                observer(TurnEvent::ToolCall(call));
                let spoken_before = notes.spoken.len();
                let outcome = dispatch(&self.registry, call, &self.scene, &mut self.state, &mut notes);
                if matches!(outcome, DispatchOutcome::Rejected(_)) {
                    rejected += 1;
                }
                let result = ToolResult {
                    call_id: call.id.clone(),
                    content: outcome.text().to_string(),
                    is_error: outcome.is_error(),
                };
                observer(TurnEvent::ToolResult(&result));
                if let Some(reply) = notes.spoken.get(spoken_before) {
                    observer(TurnEvent::Speak(reply));
                }
                self.history.push(Message::Tool {
                    tool_call_id: call.id.clone(),
                    name: call.name.clone(),
                    content: result.content.clone(),
                });
                turn.exchanges.push(ToolExchange {
                    iteration,
                    call: call.clone(),
                    result,
                });
            }
            if rejected > MAX_REJECTED_CALLS {
                break 'turn Err(format!("{rejected} tool calls rejected"));
            }
        };

        turn.reasoning = notes.reasoning;
        turn.required_objects = notes.required_objects;
        turn.spoken = notes.spoken;
        match outcome {
            Err(e) => {
                turn.status = TurnStatus::Error;
                turn.error = Some(e);
            }
            Ok(()) => {
                let asked = turn.spoken.iter().any(|s| s.text.contains('?'));
                let finalized = turn.required_objects.as_ref().is_some_and(|r| !r.is_empty());
                turn.status = if asked && !finalized {
                    TurnStatus::ClarificationRequested
                } else {
                    TurnStatus::Completed
                };
            }
        }
        turn
    }

    fn complete_with_retries(
        &self,
        request: &CompletionRequest,
        retries: &mut u32,
    ) -> Result<super::backend::CompletionResponse, BackendError> {
        let mut attempt = 0u32;
        loop {
            match self.backend.complete(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retryable() && attempt < self.config.max_backend_retries => {
                    attempt += 1;
                    *retries += 1;
                    tracing::warn!(attempt, error = %e, "backend call failed, retrying");
                }
                Err(e) => return Err(e),
            }
        }
    }
}
