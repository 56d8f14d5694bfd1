//! Deterministic stand-ins for a remote model: a replay backend that plays
//! back a fixed script, and a heuristic backend that resolves requests from
//! gaze dwell alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{Backend, BackendError, CompletionRequest, CompletionResponse, Message, ToolCall};
use super::prompt::{robot_name_from_prompt, DEFAULT_ROBOT_NAME};
use crate::scanpath::parse_prompt_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCall {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default)]
    pub tool_calls: Vec<ScriptedCall>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayScript {
    pub responses: Vec<ScriptedResponse>,
}

impl ReplayScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Plays back scripted responses. The response index is the number of
/// assistant messages already in the request, so replies depend only on
/// the request.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    script: ReplayScript,
}

impl ReplayBackend {
    pub fn new(script: ReplayScript) -> Self {
        Self { script }
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "scripted-replay"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let index = request
            .messages
            .iter()
            .filter(|m| matches!(m, Message::Assistant { .. }))
            .count();
        let scripted = self
            .script
            .responses
            .get(index)
            .ok_or(BackendError::ScriptExhausted(self.script.responses.len()))?;
        let tool_calls = scripted
            .tool_calls
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let id = c.id.clone().unwrap_or_else(|| format!("call_{index}_{j}"));
                ToolCall::new(id, c.name.clone(), c.arguments.clone())
            })
            .collect();
        Ok(CompletionResponse {
            content: scripted.content.clone(),
            tool_calls,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Segments shorter than this are ignored as spurious glances.
    pub min_segment_ms: f64,
    /// Objects whose dwell exceeds this fraction of the top score are
    /// required.
    pub relative_threshold: f64,
    pub person_name: String,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            min_segment_ms: 200.0,
            relative_threshold: 0.4,
            person_name: "user".to_string(),
        }
    }
}

/// Dwell-weighted resolver. Per turn it queries the scene (when the tool
/// exists), then emits `reasoning`, `required_objects` and `speak`, then one
/// action if action tools are registered, then a final message.
///
/// Required objects are every non-robot object whose dwell, summed over
/// segments of at least `min_segment_ms` and split evenly inside
/// multi-object segments, exceeds `relative_threshold` times the largest
/// score. They are listed in order of first fixation. With nothing left it
/// asks a clarification question instead.
///
/// Action choice: two objects pour the first-fixated into the second; one
/// object is handed over to the user.
#[derive(Debug, Clone, Default)]
pub struct HeuristicBackend {
    config: HeuristicConfig,
}

struct TurnView<'a> {
    user_input: &'a str,
    called: Vec<&'a ToolCall>,
    call_count_total: usize,
}

fn view(messages: &[Message]) -> Option<TurnView<'_>> {
    let last_user = messages.iter().rposition(|m| matches!(m, Message::User { .. }))?;
    let Message::User { content } = &messages[last_user] else {
        unreachable!()
    };
    let called = messages[last_user..]
        .iter()
        .flat_map(|m| match m {
            Message::Assistant { tool_calls, .. } => tool_calls.iter().collect::<Vec<_>>(),
            _ => Vec::new(),
        })
        .collect();
    let call_count_total = messages
        .iter()
        .map(|m| match m {
            Message::Assistant { tool_calls, .. } => tool_calls.len(),
            _ => 0,
        })
        .sum();
    Some(TurnView {
        user_input: content,
        called,
        call_count_total,
    })
}

/// Latest `query_objects` result anywhere in the conversation.
fn known_scene_objects(messages: &[Message]) -> Option<Vec<String>> {
    messages.iter().rev().find_map(|m| match m {
        Message::Tool { name, content, .. } if name == "query_objects" => Some(
            content
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "(none)")
                .map(String::from)
                .collect(),
        ),
        _ => None,
    })
}

/// Scores objects from a parsed prompt block, returning them with their
/// dwell in first-fixation order.
pub fn dwell_scores(input: &str, robot: &str, config: &HeuristicConfig) -> Option<Vec<(String, f64)>> {
    let sp = parse_prompt_text(input).ok()?;
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for seg in &sp.gaze_history.segments {
        if seg.duration_ms < config.min_segment_ms {
            continue;
        }
        let share = seg.duration_ms / seg.object_ids.len() as f64;
        for id in seg.object_ids.iter().filter(|id| id.as_str() != robot) {
            *scores.entry(id.clone()).or_default() += share;
            if !order.contains(id) {
                order.push(id.clone());
            }
        }
    }
    Some(order.into_iter().map(|id| {
        let s = scores[&id];
        (id, s)
    }).collect())
}

fn humanize(id: &str) -> String {
    id.replace(['_', '-'], " ")
}

impl HeuristicBackend {
    pub fn new(config: HeuristicConfig) -> Self {
        Self { config }
    }

    fn select(&self, input: &str, robot: &str, scene: Option<&[String]>) -> Option<Vec<(String, f64)>> {
        let mut scored = dwell_scores(input, robot, &self.config)?;
        if let Some(ids) = scene {
            scored.retain(|(id, _)| ids.contains(id));
        }
        let max = scored.iter().map(|(_, s)| *s).fold(0.0, f64::max);
        if max <= 0.0 {
            return Some(Vec::new());
        }
        scored.retain(|(_, s)| *s > self.config.relative_threshold * max);
        Some(scored)
    }
}

impl Backend for HeuristicBackend {
    fn name(&self) -> &str {
        "scripted-heuristic"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let turn = view(&request.messages)
            .ok_or_else(|| BackendError::Protocol("no user message in request".into()))?;
        let robot = request
            .messages
            .iter()
            .find_map(|m| match m {
                Message::System { content } => robot_name_from_prompt(content),
                _ => None,
            })
            .unwrap_or(DEFAULT_ROBOT_NAME);
        let has_called = |name: &str| turn.called.iter().any(|c| c.name == name);
        let next_id = |j: usize| format!("call_{}", turn.call_count_total + j);
        let person = self.config.person_name.as_str();

        if request.has_tool("query_objects") && !has_called("query_objects") {
            return Ok(CompletionResponse::calls(vec![ToolCall::new(
                next_id(0),
                "query_objects",
                json!({}),
            )]));
        }

        if !has_called("speak") {
            let scene = known_scene_objects(&request.messages);
            let selected = self.select(turn.user_input, robot, scene.as_deref());
            let calls = match selected {
                Some(sel) if !sel.is_empty() => {
                    let ids: Vec<&str> = sel.iter().map(|(id, _)| id.as_str()).collect();
                    let dwell: Vec<String> = sel
                        .iter()
                        .map(|(id, s)| format!("{id} ({:.2}s)", s / 1000.0))
                        .collect();
                    let names: Vec<String> = ids.iter().map(|id| format!("the {}", humanize(id))).collect();
                    vec![
                        ToolCall::new(
                            next_id(0),
                            "reasoning",
                            json!({"reason": format!(
                                "The gaze history dwells longest on {} while the user speaks, so the request refers to {}.",
                                dwell.join(" and "),
                                if ids.len() == 1 { "this object" } else { "these objects" }
                            )}),
                        ),
                        ToolCall::new(next_id(1), "required_objects", json!({"objects": ids})),
                        ToolCall::new(
                            next_id(2),
                            "speak",
                            json!({"person_name": person, "text": format!("Sure, I will help you with {}.", names.join(" and "))}),
                        ),
                    ]
                }
                _ => vec![ToolCall::new(
                    next_id(0),
                    "speak",
                    json!({"person_name": person, "text": "Sorry, I am not sure which object you mean. Could you look at it and tell me again?"}),
                )],
            };
            return Ok(CompletionResponse::calls(calls));
        }

        let required: Vec<String> = turn
            .called
            .iter()
            .rev()
            .find(|c| c.name == "required_objects")
            .and_then(|c| c.arguments.get("objects"))
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
            .unwrap_or_default();
        let acted = ["pour_into", "hand_object_over_to_person", "move_object_to_person"]
            .iter()
            .any(|t| has_called(t));
        if !acted {
            if required.len() == 2 && request.has_tool("pour_into") {
                return Ok(CompletionResponse::calls(vec![ToolCall::new(
                    next_id(0),
                    "pour_into",
                    json!({"source_container_name": required[0], "target_container_name": required[1]}),
                )]));
            }
            if required.len() == 1 && request.has_tool("hand_object_over_to_person") {
                return Ok(CompletionResponse::calls(vec![ToolCall::new(
                    next_id(0),
                    "hand_object_over_to_person",
                    json!({"object_name": required[0], "person_name": person}),
                )]));
            }
        }
        Ok(CompletionResponse::text(if required.is_empty() {
            "Waiting for the user to clarify."
        } else {
            "Done."
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dwell_scores_follow_the_rule() {
        let block = "Speech input: \"Can you help me with this?\"\nGaze history:\n\
                     1. [the_robot] 1.00s\n2. [cereal_box] 1.20s\n3. [orange_juice] 0.15s\n4. [bowl, small_bowl] 0.60s\n5. [bowl] 0.80s";
        let scores = dwell_scores(block, "the_robot", &HeuristicConfig::default()).unwrap();
        // bowl: 600/2 + 800 = 1100; small_bowl: 300; juice skipped (< 200 ms)
        assert_eq!(
            scores,
            vec![
                ("cereal_box".to_string(), 1200.0),
                ("bowl".to_string(), 1100.0),
                ("small_bowl".to_string(), 300.0)
            ]
        );
        let b = HeuristicBackend::default();
        let sel: Vec<String> = b.select(block, "the_robot", None).unwrap().into_iter().map(|(id, _)| id).collect();
        // threshold 0.4 * 1200 = 480
        assert_eq!(sel, ["cereal_box", "bowl"]);
    }

    #[test]
    fn scene_filter_drops_unknown_ids() {
        let block = "Speech input: \"x\"\nGaze history:\n1. [ghost] 2.00s\n2. [bowl] 0.50s";
        let b = HeuristicBackend::default();
        let scene = vec!["bowl".to_string()];
        let sel = b.select(block, "the_robot", Some(&scene)).unwrap();
        assert_eq!(sel, vec![("bowl".to_string(), 500.0)]);
    }
}
