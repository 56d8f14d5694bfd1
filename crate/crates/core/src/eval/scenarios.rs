use crate::geometry::{Scene, Vec3};
use crate::io::parse_scene_str;

use super::{EvalError, TaskId, TaskSpec};

pub const SCENARIO_IDS: [&str; 2] = ["breakfast", "drink"];

const BREAKFAST_JSON: &str = include_str!("../../scenes/breakfast.json");
const DRINK_JSON: &str = include_str!("../../scenes/drink.json");

/// A tabletop scene, where the user's head usually is, and its three
/// sequential tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub scene: Scene,
    pub viewer: Vec3,
    pub tasks: [TaskSpec; 3],
}

impl Scenario {
    pub fn task(&self, task: TaskId) -> &TaskSpec {
        &self.tasks[task.index()]
    }

    pub fn robot_id(&self) -> &str {
        self.scene.robot_id().expect("built-in scenes have a robot")
    }
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[allow(clippy::too_many_arguments)]
fn task(
    scenario: &str,
    task: TaskId,
    preamble: Option<&str>,
    request: &str,
    label: &str,
    inference: &str,
    targets: &[&str],
    distractors: &[&str],
    irrelevant: &[&str],
) -> TaskSpec {
    TaskSpec {
        scenario: scenario.into(),
        task,
        preamble: preamble.map(String::from),
        request: request.into(),
        label: label.into(),
        inference: inference.into(),
        targets: ids(targets),
        distractors: ids(distractors),
        irrelevant: ids(irrelevant),
    }
}

fn load(json: &str, name: &str) -> (Scene, Vec3) {
    let (scene, viewer) = parse_scene_str(json, name).expect("built-in scene files are valid");
    (scene, viewer.expect("built-in scene files define a viewer"))
}

fn breakfast() -> Scenario {
    let (scene, viewer) = load(BREAKFAST_JSON, "scenes/breakfast.json");
    let s = "breakfast";
    Scenario {
        id: s.into(),
        scene,
        viewer,
        tasks: [
            task(
                s,
                TaskId::T1,
                None,
                "Can you help me with this?",
                "Infer user intent",
                "Pour cereal in the bowl",
                &["cereal_box", "bowl"],
                &["orange_juice", "milk_bottle", "small_bowl"],
                &[],
            ),
            task(
                s,
                TaskId::T2,
                Some("I’d like to prepare my cereals."),
                "Could you pass me that bottle?",
                "Disambiguate object",
                "Pass the milk bottle for the cereal",
                &["milk_bottle"],
                &["orange_juice"],
                &["cereal_box", "small_bowl", "bowl"],
            ),
            task(
                s,
                TaskId::T3,
                None,
                "Can I also have some sugar?",
                "Infer content",
                "Get the sugar bowl",
                &["small_bowl"],
                &["milk_bottle", "orange_juice", "cereal_box"],
                &["bowl"],
            ),
        ],
    }
}

fn drink() -> Scenario {
    let (scene, viewer) = load(DRINK_JSON, "scenes/drink.json");
    let s = "drink";
    Scenario {
        id: s.into(),
        scene,
        viewer,
        tasks: [
            task(
                s,
                TaskId::T1,
                None,
                "I’m thirsty, can I have a drink?",
                "Infer user preference",
                "Preference for the cola",
                &["cola"],
                &["cola_zero"],
                &["red_glass", "blue_glass", "bowl"],
            ),
            task(
                s,
                TaskId::T2,
                Some("The cola please."),
                "And could you use this glass?",
                "Disambiguate object",
                "Use the glass in front of the user",
                &["red_glass"],
                &["blue_glass"],
                &["cola_zero", "cola", "bowl"],
            ),
            task(
                s,
                TaskId::T3,
                None,
                "I’d like to have some ice cubes with it",
                "Infer content",
                "Get the bowl with the ice",
                &["bowl"],
                &["blue_glass"],
                &["cola_zero", "cola", "red_glass"],
            ),
        ],
    }
}

/// The breakfast and drink scenarios with their tasks.
pub fn builtin_scenarios() -> (Scenario, Scenario) {
    (breakfast(), drink())
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, EvalError> {
    match name {
        "breakfast" => Ok(breakfast()),
        "drink" => Ok(drink()),
        _ => Err(EvalError::UnknownScenario { name: name.into() }),
    }
}
