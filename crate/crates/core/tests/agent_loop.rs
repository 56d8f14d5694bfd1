use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use gazeground_core::agent::{
    build_tool_registry, AgentConfig, AgentSession, Backend, BackendError, CancelHandle, CompletionRequest,
    CompletionResponse, ExecutedAction, HeuristicBackend, Message, ReplayBackend, ReplayScript, ToolCall, TurnEvent,
    TurnStatus,
};
use gazeground_core::eval::{builtin_scenario, demo_fixture, EvalCondition, TaskId};
use serde_json::json;

fn session(backend: Arc<dyn Backend>, condition: EvalCondition, actions: bool) -> AgentSession {
    let scenario = builtin_scenario("breakfast").unwrap();
    AgentSession::new(
        scenario.scene.clone(),
        build_tool_registry(condition, actions),
        backend,
        AgentConfig::default(),
    )
}

fn breakfast_input() -> String {
    let scenario = builtin_scenario("breakfast").unwrap();
    let f = demo_fixture(&scenario, TaskId::T1).unwrap();
    gazeground_core::scanpath::render_prompt_text(&f.record.scanpath)
}

/// Fails with the given error a fixed number of times, then delegates.
struct Flaky {
    failures: AtomicUsize,
    error: BackendError,
    inner: Arc<dyn Backend>,
}

impl Backend for Flaky {
    fn name(&self) -> &str {
        "flaky"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let left = self.failures.load(Ordering::SeqCst);
        if left > 0 {
            self.failures.store(left - 1, Ordering::SeqCst);
            return Err(self.error.clone());
        }
        self.inner.complete(request)
    }
}

fn flaky(failures: usize, error: BackendError) -> Arc<dyn Backend> {
    Arc::new(Flaky {
        failures: AtomicUsize::new(failures),
        error,
        inner: Arc::new(HeuristicBackend::default()),
    })
}

#[test]
fn heuristic_pours_cereal_into_bowl() {
    let mut s = session(Arc::new(HeuristicBackend::default()), EvalCondition::FULL, true);
    let turn = s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Completed, "{:?}", turn.error);
    assert_eq!(turn.tool_sequence()[0], "query_objects");
    assert_eq!(turn.required_objects.as_deref(), Some(&["cereal_box".to_string(), "bowl".to_string()][..]));
    let pour = turn.exchanges.iter().find(|e| e.call.name == "pour_into").unwrap();
    assert_eq!(pour.call.arguments["source_container_name"], "cereal_box");
    assert_eq!(pour.call.arguments["target_container_name"], "bowl");
    assert!(matches!(
        &s.state().actions()[0],
        ExecutedAction::PourInto { source, target, .. } if source == "cereal_box" && target == "bowl"
    ));
    assert_eq!(s.state().contents("bowl").unwrap(), ["cereal".to_string()]);
}

#[test]
fn transport_errors_are_retried_twice() {
    let mut s = session(flaky(2, BackendError::Transport("503".into())), EvalCondition::FULL, false);
    let turn = s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Completed);
    assert_eq!(turn.backend_retries, 2);

    let mut s = session(flaky(3, BackendError::Transport("503".into())), EvalCondition::FULL, false);
    let turn = s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.backend_retries, 2);
    assert!(turn.error.unwrap().contains("transport"));
}

#[test]
fn protocol_errors_are_not_retried() {
    let mut s = session(flaky(1, BackendError::Protocol("bad json".into())), EvalCondition::FULL, false);
    let turn = s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.backend_retries, 0);
}

fn replay(responses: serde_json::Value) -> Arc<dyn Backend> {
    Arc::new(ReplayBackend::new(ReplayScript::from_json(&json!({ "responses": responses }).to_string()).unwrap()))
}

#[test]
fn first_rejected_call_is_fed_back() {
    let backend = replay(json!([
        {"tool_calls": [{"name": "fly_away", "arguments": {}}]},
        {"tool_calls": [{"name": "required_objects", "arguments": {"objects": ["bowl"]}}]},
        {"content": "ok"}
    ]));
    let mut s = session(backend, EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Completed);
    assert!(turn.exchanges[0].result.is_error);
    assert_eq!(turn.required_objects, Some(vec!["bowl".to_string()]));
}

#[test]
fn second_rejected_call_fails_the_turn() {
    let backend = replay(json!([
        {"tool_calls": [{"name": "fly_away", "arguments": {}}]},
        {"tool_calls": [{"name": "speak", "arguments": {"text": 3}}]},
        {"content": "never reached"}
    ]));
    let mut s = session(backend, EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.iterations, 2);
}

#[test]
fn action_tools_absent_when_disabled() {
    let backend = replay(json!([
        {"tool_calls": [{"name": "pour_into", "arguments": {"source_container_name": "cereal_box", "target_container_name": "bowl"}}]},
        {"content": "done"}
    ]));
    let mut s = session(backend, EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert!(turn.exchanges[0].result.is_error);
    assert!(s.state().actions().is_empty());
}

/// Never stops calling tools.
struct Chatty;

impl Backend for Chatty {
    fn name(&self) -> &str {
        "chatty"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let n = request.messages.len();
        Ok(CompletionResponse::calls(vec![ToolCall::new(
            format!("c{n}"),
            "reasoning",
            json!({"reason": "thinking"}),
        )]))
    }
}

#[test]
fn iteration_limit_ends_the_turn() {
    let mut s = session(Arc::new(Chatty), EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.iterations, 16);
    assert!(turn.error.unwrap().contains("iteration limit"));
}

/// Cancels the session after the first completion.
struct Canceller(Mutex<Option<CancelHandle>>);

impl Backend for Canceller {
    fn name(&self) -> &str {
        "canceller"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if let Some(h) = self.0.lock().unwrap().as_ref() {
            h.cancel();
        }
        Chatty.complete(request)
    }
}

#[test]
fn cancellation_stops_between_iterations() {
    let backend = Arc::new(Canceller(Mutex::new(None)));
    let mut s = session(backend.clone(), EvalCondition::FULL, false);
    *backend.0.lock().unwrap() = Some(s.cancel_handle());
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Error);
    assert_eq!(turn.iterations, 1);
    assert!(turn.error.unwrap().contains("cancel"));
    // The flag resets for the next turn.
    *backend.0.lock().unwrap() = None;
    let s2 = s.run_turn_text("y", &mut |_| {});
    assert!(s2.iterations > 1);
}

#[test]
fn clarification_is_detected() {
    let backend = replay(json!([
        {"tool_calls": [{"name": "speak", "arguments": {"person_name": "user", "text": "Which one do you mean?"}}]},
        {"content": "waiting"}
    ]));
    let mut s = session(backend, EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::ClarificationRequested);
    assert!(!turn.is_scoreable());
}

#[test]
fn question_with_required_objects_is_completed() {
    let backend = replay(json!([
        {"tool_calls": [
            {"name": "required_objects", "arguments": {"objects": "cereal_box, bowl"}},
            {"name": "speak", "arguments": {"person_name": "user", "text": "Cereal in the bowl?"}}
        ]},
        {"content": "done"}
    ]));
    let mut s = session(backend, EvalCondition::FULL, false);
    let turn = s.run_turn_text("x", &mut |_| {});
    assert_eq!(turn.status, TurnStatus::Completed);
    assert_eq!(turn.required_objects, Some(vec!["cereal_box".to_string(), "bowl".to_string()]));
}

#[test]
fn observer_sees_calls_results_and_speech_in_order() {
    let mut events = Vec::new();
    let mut s = session(Arc::new(HeuristicBackend::default()), EvalCondition::FULL, true);
    let turn = s.run_turn_text(&breakfast_input(), &mut |e| {
        events.push(match e {
            TurnEvent::ToolCall(c) => format!("call:{}", c.name),
            TurnEvent::ToolResult(r) => format!("result:{}", r.call_id),
            TurnEvent::Speak(_) => "speak".to_string(),
        })
    });
    let calls = events.iter().filter(|e| e.starts_with("call:")).count();
    let results = events.iter().filter(|e| e.starts_with("result:")).count();
    assert_eq!(calls, turn.exchanges.len());
    assert_eq!(results, calls);
    assert_eq!(events.iter().filter(|e| *e == "speak").count(), turn.spoken.len());
    let speak_call = events.iter().position(|e| e == "call:speak").unwrap();
    assert_eq!(events[speak_call + 2], "speak");
}

#[test]
fn ablation_never_calls_query_objects() {
    let mut s = session(Arc::new(HeuristicBackend::default()), EvalCondition::SPEECH_GAZE, false);
    assert!(!s.registry().contains("query_objects"));
    let turn = s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert!(!turn.called("query_objects"));
    assert_eq!(turn.status, TurnStatus::Completed);
}

#[test]
fn history_persists_across_turns() {
    let mut s = session(Arc::new(HeuristicBackend::default()), EvalCondition::FULL, false);
    s.run_turn_text(&breakfast_input(), &mut |_| {});
    let after_first = s.history().len();
    s.run_turn_text(&breakfast_input(), &mut |_| {});
    assert!(s.history().len() > after_first);
    assert!(matches!(s.history()[0], Message::System { .. }));
    let users = s.history().iter().filter(|m| matches!(m, Message::User { .. })).count();
    assert_eq!(users, 2);
}

#[test]
fn heuristic_runs_are_deterministic() {
    let run = || {
        let mut s = session(Arc::new(HeuristicBackend::default()), EvalCondition::FULL, true);
        serde_json::to_string(&s.run_turn_text(&breakfast_input(), &mut |_| {})).unwrap()
    };
    let first = run();
    for _ in 0..5 {
        assert_eq!(run(), first);
    }
}
