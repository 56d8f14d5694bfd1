use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::backend::{Arguments, ToolCall, RAW_ARGUMENTS_KEY};
use super::state::SimulatedSceneState;
use crate::eval::EvalCondition;
use crate::geometry::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolClass {
    Query,
    Diagnostic,
    Expression,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolParam {
    pub name: String,
    /// `"string"` or `"array"` (of strings).
    #[serde(rename = "type")]
    pub param_type: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub class: ToolClass,
    pub parameters: Vec<ToolParam>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    QueryObjects,
    Reasoning,
    RequiredObjects,
    Speak,
    MoveObjectToPerson,
    HandObjectOverToPerson,
    PourInto,
}

fn param(name: &str, param_type: &str, description: &str) -> ToolParam {
    ToolParam {
        name: name.into(),
        param_type: param_type.into(),
        description: description.into(),
    }
}

impl ToolKind {
    pub const ALL: [ToolKind; 7] = [
        ToolKind::QueryObjects,
        ToolKind::Reasoning,
        ToolKind::RequiredObjects,
        ToolKind::Speak,
        ToolKind::MoveObjectToPerson,
        ToolKind::HandObjectOverToPerson,
        ToolKind::PourInto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolKind::QueryObjects => "query_objects",
            ToolKind::Reasoning => "reasoning",
            ToolKind::RequiredObjects => "required_objects",
            ToolKind::Speak => "speak",
            ToolKind::MoveObjectToPerson => "move_object_to_person",
            ToolKind::HandObjectOverToPerson => "hand_object_over_to_person",
            ToolKind::PourInto => "pour_into",
        }
    }

    pub fn from_name(name: &str) -> Option<ToolKind> {
        ToolKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn class(self) -> ToolClass {
        match self {
            ToolKind::QueryObjects => ToolClass::Query,
            ToolKind::Reasoning | ToolKind::RequiredObjects => ToolClass::Diagnostic,
            ToolKind::Speak => ToolClass::Expression,
            ToolKind::MoveObjectToPerson | ToolKind::HandObjectOverToPerson | ToolKind::PourInto => {
                ToolClass::Action
            }
        }
    }

    pub fn spec(self) -> ToolSpec {
        let (description, parameters) = match self {
            ToolKind::QueryObjects => (
                "Query all objects that are available in the scene. You can see all these objects.",
                vec![],
            ),
            ToolKind::Reasoning => (
                "You provide a reason for the action you are about to take.",
                vec![param("reason", "string", "The reason for the action you are about to take.")],
            ),
            ToolKind::RequiredObjects => (
                "You provide the name of the objects the user requires to fulfill a request.",
                vec![param(
                    "objects",
                    "array",
                    "The names of the objects the user requires to fulfill the request.",
                )],
            ),
            ToolKind::Speak => (
                "You speak out the given text.",
                vec![
                    param("person_name", "string", "The name of the person to speak to."),
                    param("text", "string", "The text to speak."),
                ],
            ),
            ToolKind::MoveObjectToPerson => (
                "You get an object and move it to a person.",
                vec![
                    param(
                        "object_name",
                        "string",
                        "The name of the object to move. The object must be available in the scene.",
                    ),
                    param("person_name", "string", "The name of the person to move the object to."),
                ],
            ),
            ToolKind::HandObjectOverToPerson => (
                "You get an object and hand it over to a person.",
                vec![
                    param(
                        "object_name",
                        "string",
                        "The name of the object to hand over. The object must be available in the scene.",
                    ),
                    param("person_name", "string", "The name of the person to hand over the object to."),
                ],
            ),
            ToolKind::PourInto => (
                "You get a source container, pour it into a target container, and put it back on the table.",
                vec![
                    param("source_container_name", "string", "The name of the container to pour from."),
                    param("target_container_name", "string", "The name of the container to pour into."),
                ],
            ),
        };
        ToolSpec {
            name: self.name().to_string(),
            description: description.to_string(),
            class: self.class(),
            parameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("tool {0:?} is already registered")]
    Duplicate(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolRegistry {
    tools: Vec<ToolKind>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kind: ToolKind) -> Result<(), RegistryError> {
        if self.tools.contains(&kind) {
            return Err(RegistryError::Duplicate(kind.name().to_string()));
        }
        self.tools.push(kind);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn lookup(&self, name: &str) -> Option<ToolKind> {
        self.tools.iter().copied().find(|k| k.name() == name)
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.iter().map(|k| k.spec()).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tools.iter().map(|k| k.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }
}

/// Diagnostic and expression tools are always present; the scene query is
/// removed in the ablated condition and action tools are opt-in.
pub fn build_tool_registry(condition: EvalCondition, actions_enabled: bool) -> ToolRegistry {
    let mut registry = ToolRegistry::new();
    let mut kinds = Vec::new();
    if condition.scene_query_enabled {
        kinds.push(ToolKind::QueryObjects);
    }
    kinds.extend([ToolKind::Reasoning, ToolKind::RequiredObjects, ToolKind::Speak]);
    if actions_enabled {
        kinds.extend([
            ToolKind::MoveObjectToPerson,
            ToolKind::HandObjectOverToPerson,
            ToolKind::PourInto,
        ]);
    }
    for kind in kinds {
        registry.register(kind).expect("each kind is registered once");
    }
    registry
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpokenReply {
    pub person_name: String,
    pub text: String,
}

/// What the diagnostic and expression tools recorded during a turn.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct TurnNotes {
    pub reasoning: Vec<String>,
    pub required_objects: Option<Vec<String>>,
    pub spoken: Vec<SpokenReply>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum DispatchOutcome {
    Ok(String),
    /// The tool ran but refused the request (e.g. object already moved).
    Failed(String),
    /// Unknown tool or malformed arguments.
    Rejected(String),
}

impl DispatchOutcome {
    pub fn text(&self) -> &str {
        match self {
            DispatchOutcome::Ok(t) | DispatchOutcome::Failed(t) | DispatchOutcome::Rejected(t) => t,
        }
    }

    pub fn is_error(&self) -> bool {
        !matches!(self, DispatchOutcome::Ok(_))
    }
}

fn string_arg<'a>(args: &'a Arguments, name: &str) -> Result<&'a str, String> {
    match args.get(name) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(format!("argument {name:?} must be a string, got {other}")),
        None => Err(format!("missing argument {name:?}")),
    }
}

fn list_arg(args: &Arguments, name: &str) -> Result<Vec<String>, String> {
    match args.get(name) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.trim().to_string()),
                other => Err(format!("argument {name:?} must contain strings, got {other}")),
            })
            .collect(),
        Some(Value::String(s)) => Ok(s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()),
        Some(other) => Err(format!("argument {name:?} must be a list of strings, got {other}")),
        None => Err(format!("missing argument {name:?}")),
    }
}

pub(crate) fn query_objects_text(scene: &Scene) -> String {
    let ids: Vec<&str> = scene.items().map(|o| o.id.as_str()).collect();
    if ids.is_empty() {
        "(none)".to_string()
    } else {
        ids.join(", ")
    }
}

pub(crate) fn dispatch(
    registry: &ToolRegistry,
    call: &ToolCall,
    scene: &Scene,
    state: &mut SimulatedSceneState,
    notes: &mut TurnNotes,
) -> DispatchOutcome {
    let Some(kind) = registry.lookup(&call.name) else {
        return DispatchOutcome::Rejected(format!(
            "Error: unknown tool {:?}. Available tools: {}.",
            call.name,
            registry.names().join(", ")
        ));
    };
    if call.arguments.contains_key(RAW_ARGUMENTS_KEY) {
        return DispatchOutcome::Rejected(format!(
            "Error: arguments for {} are not a JSON object.",
            call.name
        ));
    }
    match run_tool(kind, &call.arguments, scene, state, notes) {
        Ok(outcome) => outcome,
        Err(msg) => DispatchOutcome::Rejected(format!("Error: invalid arguments for {}: {msg}.", call.name)),
    }
}

fn run_tool(
    kind: ToolKind,
    args: &Arguments,
    scene: &Scene,
    state: &mut SimulatedSceneState,
    notes: &mut TurnNotes,
) -> Result<DispatchOutcome, String> {
    let action = |r: Result<String, super::state::ActionError>| match r {
        Ok(text) => DispatchOutcome::Ok(text),
        Err(e) => DispatchOutcome::Failed(format!("Error: {e}.")),
    };
    Ok(match kind {
        ToolKind::QueryObjects => DispatchOutcome::Ok(query_objects_text(scene)),
        ToolKind::Reasoning => {
            let reason = string_arg(args, "reason")?;
            notes.reasoning.push(reason.to_string());
            DispatchOutcome::Ok("Reasoning recorded.".into())
        }
        ToolKind::RequiredObjects => {
            let objects = list_arg(args, "objects")?;
            let unknown: Vec<&str> = objects
                .iter()
                .map(String::as_str)
                .filter(|id| !scene.contains(id))
                .collect();
            let text = if objects.is_empty() {
                "Recorded an empty list of required objects.".to_string()
            } else if unknown.is_empty() {
                format!("Required objects recorded: {}.", objects.join(", "))
            } else {
                format!(
                    "Warning: unknown object ids: {}. Known objects: {}.",
                    unknown.join(", "),
                    scene.ids().collect::<Vec<_>>().join(", ")
                )
            };
            notes.required_objects = Some(objects);
            DispatchOutcome::Ok(text)
        }
        ToolKind::Speak => {
            let person = string_arg(args, "person_name")?;
            let text = string_arg(args, "text")?;
            if text.trim().is_empty() {
                DispatchOutcome::Ok("Warning: empty text, nothing was spoken.".into())
            } else {
                notes.spoken.push(SpokenReply {
                    person_name: person.to_string(),
                    text: text.to_string(),
                });
                DispatchOutcome::Ok(format!("Spoke to {person}."))
            }
        }
        ToolKind::MoveObjectToPerson => action(state.move_object_to_person(
            string_arg(args, "object_name")?,
            string_arg(args, "person_name")?,
        )),
        ToolKind::HandObjectOverToPerson => action(state.hand_object_over_to_person(
            string_arg(args, "object_name")?,
            string_arg(args, "person_name")?,
        )),
        ToolKind::PourInto => action(state.pour_into(
            string_arg(args, "source_container_name")?,
            string_arg(args, "target_container_name")?,
        )),
    })
}
