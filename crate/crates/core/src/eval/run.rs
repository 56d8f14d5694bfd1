use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::protocol::{combinatorial_interactions, gaze_distribution, score_turn, GazeDistribution, Interaction};
use super::stats::{chi_square_2x2, odds_ratio, ChiSquare, OddsRatio};
use super::{EvalCondition, EvalError, RecordGrid, Scenario, TaskId};
use crate::agent::{build_tool_registry, AgentConfig, AgentSession, Backend, TurnStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub condition: EvalCondition,
    /// Worker threads for interactions; 0 uses all cores.
    pub parallelism: usize,
    /// Leave out turns whose gaze history misses a target object.
    pub discard_missed_target: bool,
    pub actions_enabled: bool,
    pub agent: AgentConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            condition: EvalCondition::FULL,
            parallelism: 0,
            discard_missed_target: false,
            actions_enabled: false,
            agent: AgentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnVerdict {
    pub task: TaskId,
    pub user_id: String,
    pub status: TurnStatus,
    pub required_objects: Option<Vec<String>>,
    pub correct: bool,
    pub discarded: bool,
    pub queried_scene: bool,
    pub tool_sequence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<GazeDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub index: usize,
    pub users: [String; 3],
    pub turns: Vec<TurnVerdict>,
}

impl InteractionOutcome {
    pub fn queried_scene(&self) -> bool {
        self.turns.iter().any(|t| t.queried_scene)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: TaskId,
    pub turns: usize,
    pub discarded: usize,
    pub correct: usize,
    pub wrong: usize,
    /// `correct / (turns - discarded)`; `None` when nothing was scored.
    pub accuracy: Option<f64>,
    pub clarifications: usize,
    pub errors: usize,
    /// Mean gaze distribution over correctly and wrongly inferred turns.
    pub distribution_correct: Option<GazeDistribution>,
    pub distribution_wrong: Option<GazeDistribution>,
    /// Turns left out of the distributions because their history is empty.
    pub zero_dwell_turns: usize,
}

/// Within one condition: T3 accuracy by whether the scene was queried at
/// any point of the interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEffect {
    pub task: TaskId,
    /// `[[correct, wrong] queried, [correct, wrong] not queried]`.
    pub table: [[usize; 2]; 2],
    pub odds_ratio: OddsRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub scenario: String,
    pub condition: EvalCondition,
    pub condition_name: String,
    pub backend: String,
    pub interactions: usize,
    pub tasks: Vec<TaskMetrics>,
    pub query_objects_calls: usize,
    pub query_effect: Option<QueryEffect>,
    pub outcomes: Vec<InteractionOutcome>,
}

impl ConditionResult {
    pub fn task(&self, task: TaskId) -> &TaskMetrics {
        &self.tasks[task.index()]
    }
}

fn run_interaction(
    interaction: &Interaction<'_>,
    scenario: &Scenario,
    options: &EvalOptions,
    backend: &Arc<dyn Backend>,
) -> InteractionOutcome {
    let registry = build_tool_registry(options.condition, options.actions_enabled);
    let mut session = AgentSession::new(scenario.scene.clone(), registry, backend.clone(), options.agent.clone());
    let robot = scenario.robot_id();
    let turns = interaction
        .records
        .iter()
        .map(|record| {
            let spec = scenario.task(record.task);
            let turn = session.run_turn(&record.scanpath);
            let history = &record.scanpath.gaze_history;
            let discarded = options.discard_missed_target && !spec.targets.iter().all(|t| history.mentions(t));
            TurnVerdict {
                task: record.task,
                user_id: record.user_id.clone(),
                status: turn.status,
                required_objects: turn.required_objects.clone(),
                correct: score_turn(&turn, spec),
                discarded,
                queried_scene: turn.called("query_objects"),
                tool_sequence: turn.tool_sequence().into_iter().map(String::from).collect(),
                distribution: gaze_distribution(history, spec, robot).ok(),
                error: turn.error.clone(),
            }
        })
        .collect();
    InteractionOutcome {
        index: interaction.index,
        users: interaction.users().map(String::from),
        turns,
    }
}

fn task_metrics(task: TaskId, outcomes: &[InteractionOutcome]) -> TaskMetrics {
    let verdicts: Vec<&TurnVerdict> = outcomes.iter().map(|o| &o.turns[task.index()]).collect();
    let kept: Vec<&&TurnVerdict> = verdicts.iter().filter(|v| !v.discarded).collect();
    let correct = kept.iter().filter(|v| v.correct).count();
    let wrong = kept.len() - correct;
    let dist = |want: bool| GazeDistribution::mean(kept.iter().filter(|v| v.correct == want).filter_map(|v| v.distribution.as_ref()));
    TaskMetrics {
        task,
        turns: verdicts.len(),
        discarded: verdicts.len() - kept.len(),
        correct,
        wrong,
        accuracy: (!kept.is_empty()).then(|| correct as f64 / kept.len() as f64),
        clarifications: kept.iter().filter(|v| v.status == TurnStatus::ClarificationRequested).count(),
        errors: kept.iter().filter(|v| v.status == TurnStatus::Error).count(),
        distribution_correct: dist(true),
        distribution_wrong: dist(false),
        zero_dwell_turns: kept.iter().filter(|v| v.distribution.is_none()).count(),
    }
}

fn query_effect(outcomes: &[InteractionOutcome], task: TaskId) -> QueryEffect {
    let mut table = [[0usize; 2]; 2];
    for o in outcomes {
        let v = &o.turns[task.index()];
        if v.discarded {
            continue;
        }
        let row = if o.queried_scene() { 0 } else { 1 };
        let col = if v.correct { 0 } else { 1 };
        table[row][col] += 1;
    }
    let [[a, b], [c, d]] = table.map(|r| r.map(|x| x as f64));
    QueryEffect {
        task,
        table,
        odds_ratio: odds_ratio(a, b, c, d).expect("counts are valid"),
    }
}

/// Runs every combinatorial interaction of `scenario` through the agent
/// under one condition. Each interaction gets a fresh session; turns within
/// it share the conversation. Backend failures are recorded per turn.
pub fn run_evaluation(
    grid: &RecordGrid,
    scenario: &Scenario,
    options: &EvalOptions,
    backend: Arc<dyn Backend>,
) -> Result<ConditionResult, EvalError> {
    let interactions = combinatorial_interactions(grid, &scenario.id)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| EvalError::InvalidOption(format!("thread pool: {e}")))?;
    let outcomes: Vec<InteractionOutcome> = pool.install(|| {
        interactions
            .par_iter()
            .map(|i| run_interaction(i, scenario, options, &backend))
            .collect()
    });
    let tasks = TaskId::ALL.iter().map(|t| task_metrics(*t, &outcomes)).collect();
    let query_objects_calls = outcomes
        .iter()
        .flat_map(|o| &o.turns)
        .map(|t| t.tool_sequence.iter().filter(|n| *n == "query_objects").count())
        .sum();
    Ok(ConditionResult {
        scenario: scenario.id.clone(),
        condition: options.condition,
        condition_name: options.condition.name().to_string(),
        backend: backend.name().to_string(),
        interactions: outcomes.len(),
        tasks,
        query_objects_calls,
        query_effect: options
            .condition
            .scene_query_enabled
            .then(|| query_effect(&outcomes, TaskId::T3)),
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionComparison {
    pub task: TaskId,
    /// `[[correct, wrong] with scene query, [correct, wrong] without]`.
    pub table: [[usize; 2]; 2],
    pub chi_square: Option<ChiSquare>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-task chi-square between the full and the ablated condition.
pub fn compare_conditions(full: &ConditionResult, ablated: &ConditionResult) -> Vec<ConditionComparison> {
    TaskId::ALL
        .iter()
        .map(|&task| {
            let (f, a) = (full.task(task), ablated.task(task));
            let table = [[f.correct, f.wrong], [a.correct, a.wrong]];
            let [[w, x], [y, z]] = table.map(|r| r.map(|v| v as f64));
            let (chi_square, note) = match chi_square_2x2(w, x, y, z) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ConditionComparison {
                task,
                table,
                chi_square,
                note,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub results: Vec<ConditionResult>,
    pub comparisons: Vec<ConditionComparison>,
}

impl EvalReport {
    /// Assembles a report; comparisons need both conditions present.
    pub fn new(scenario: &str, results: Vec<ConditionResult>) -> Self {
        let full = results.iter().find(|r| r.condition.scene_query_enabled);
        let ablated = results.iter().find(|r| !r.condition.scene_query_enabled);
        let comparisons = match (full, ablated) {
            (Some(f), Some(a)) => compare_conditions(f, a),
            _ => Vec::new(),
        };
        Self {
            scenario: scenario.to_string(),
            results,
            comparisons,
        }
    }
}
