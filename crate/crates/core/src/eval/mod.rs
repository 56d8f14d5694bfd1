//! Evaluation harness: built-in scenarios and tasks, the combinatorial
//! interaction protocol, scoring, gaze distributions and statistics.

mod protocol;
mod report;
mod run;
mod scenarios;
mod stats;
mod synth;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentTurn;
use crate::scanpath::SemanticScanpath;

pub use protocol::{combinatorial_interactions, gaze_distribution, odometer, score_turn, GazeDistribution, Interaction};
pub use report::{render_report_tables, report_csv};
pub use run::{
    compare_conditions, run_evaluation, ConditionComparison, ConditionResult, EvalOptions, EvalReport,
    InteractionOutcome, QueryEffect, TaskMetrics, TurnVerdict,
};
pub use scenarios::{builtin_scenario, builtin_scenarios, Scenario, SCENARIO_IDS};
pub use stats::{chi_square_2x2, chi_square_sf_1dof, odds_ratio, ChiSquare, OddsRatio, StatsError};
pub use synth::{demo_fixture, synthesize_grid, synthesize_record, DemoFixture, GazePlan, SynthOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    T1,
    T2,
    T3,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::T1, TaskId::T2, TaskId::T3];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.index() + 1)
    }
}

impl std::str::FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(TaskId::T1),
            "T2" | "2" => Ok(TaskId::T2),
            "T3" | "3" => Ok(TaskId::T3),
            _ => Err(format!("unknown task {s:?} (expected T1, T2 or T3)")),
        }
    }
}

/// Object categories for the gaze-distribution analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Robot,
    Targets,
    Distractors,
    Irrelevant,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Robot, Category::Targets, Category::Distractors, Category::Irrelevant];

    pub fn name(self) -> &'static str {
        match self {
            Category::Robot => "robot",
            Category::Targets => "targets",
            Category::Distractors => "distractors",
            Category::Irrelevant => "irrelevant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub scenario: String,
    pub task: TaskId,
    /// Context the user may say before the request proper, e.g. a
    /// confirmation of the previous turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    pub request: String,
    pub label: String,
    pub inference: String,
    pub targets: Vec<String>,
    pub distractors: Vec<String>,
    pub irrelevant: Vec<String>,
}

impl TaskSpec {
    /// Spoken text: the preamble (if any) followed by the request.
    pub fn utterance_text(&self) -> String {
        match &self.preamble {
            Some(p) => format!("{p} {}", self.request),
            None => self.request.clone(),
        }
    }

    pub fn category_of(&self, id: &str, robot_id: &str) -> Option<Category> {
        let has = |v: &[String]| v.iter().any(|x| x == id);
        if id == robot_id {
            Some(Category::Robot)
        } else if has(&self.targets) {
            Some(Category::Targets)
        } else if has(&self.distractors) {
            Some(Category::Distractors)
        } else if has(&self.irrelevant) {
            Some(Category::Irrelevant)
        } else {
            None
        }
    }
}

/// Which tools the agent gets during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalCondition {
    pub scene_query_enabled: bool,
}

impl EvalCondition {
    /// Speech, gaze and scene query.
    pub const FULL: EvalCondition = EvalCondition {
        scene_query_enabled: true,
    };
    /// Speech and gaze only.
    pub const SPEECH_GAZE: EvalCondition = EvalCondition {
        scene_query_enabled: false,
    };

    pub fn name(self) -> &'static str {
        if self.scene_query_enabled {
            "speech+gaze+scene"
        } else {
            "speech+gaze"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub user_id: String,
    pub scenario: String,
    pub task: TaskId,
    pub scanpath: SemanticScanpath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_turn: Option<AgentTurn>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing record for user {user:?}, scenario {scenario:?}, task {task}")]
    MissingCell { user: String, scenario: String, task: TaskId },
    #[error("no records for scenario {0:?}")]
    EmptyScenario(String),
    #[error("unknown scenario {name:?} (available: {})", SCENARIO_IDS.join(", "))]
    UnknownScenario { name: String },
    #[error("object {id:?} in the gaze history has no category in {scenario} {task}")]
    UncategorizedObject { id: String, scenario: String, task: TaskId },
    #[error("total dwell is zero, the gaze distribution is undefined")]
    ZeroDwell,
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Turn records indexed by (user, scenario, task).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordGrid {
    cells: BTreeMap<(String, String, TaskId), TurnRecord>,
}

impl RecordGrid {
    pub fn insert(&mut self, record: TurnRecord) -> Option<TurnRecord> {
        self.cells
            .insert((record.user_id.clone(), record.scenario.clone(), record.task), record)
    }

    pub fn get(&self, user: &str, scenario: &str, task: TaskId) -> Option<&TurnRecord> {
        self.cells.get(&(user.to_string(), scenario.to_string(), task))
    }

    pub fn records(&self) -> impl Iterator<Item = &TurnRecord> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn scenarios(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.cells.keys().map(|(_, s, _)| s.as_str()).collect();
        s.dedup();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Users with at least one record in `scenario`, sorted.
    pub fn users(&self, scenario: &str) -> Vec<&str> {
        let mut u: Vec<&str> = self
            .cells
            .keys()
            .filter(|(_, s, _)| s == scenario)
            .map(|(u, _, _)| u.as_str())
            .collect();
        u.dedup();
        u
    }

    /// Cells absent for users who appear in `scenario`.
    pub fn missing_cells(&self, scenario: &str) -> Vec<(String, TaskId)> {
        self.users(scenario)
            .into_iter()
            .flat_map(|u| TaskId::ALL.into_iter().map(move |t| (u, t)))
            .filter(|(u, t)| self.get(u, scenario, *t).is_none())
            .map(|(u, t)| (u.to_string(), t))
            .collect()
    }
}

impl FromIterator<TurnRecord> for RecordGrid {
    fn from_iter<I: IntoIterator<Item = TurnRecord>>(iter: I) -> Self {
        let mut g = RecordGrid::default();
        for r in iter {
            g.insert(r);
        }
        g
    }
}
