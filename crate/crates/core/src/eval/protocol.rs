use serde::{Deserialize, Serialize};

use super::{Category, EvalError, RecordGrid, TaskId, TaskSpec, TurnRecord};
use crate::agent::AgentTurn;
use crate::segmentation::GazeHistory;

/// All index tuples `(i0, .., ik)` with `ij < sizes[j]`, last position
/// varying fastest.
pub fn odometer(sizes: &[usize]) -> Vec<Vec<usize>> {
    if sizes.contains(&0) {
        return Vec::new();
    }
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; sizes.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for pos in (0..sizes.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
    out
}

/// One T1, T2, T3 sequence assembled from (possibly) different users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction<'a> {
    pub index: usize,
    pub records: [&'a TurnRecord; 3],
}

impl Interaction<'_> {
    pub fn users(&self) -> [&str; 3] {
        self.records.map(|r| r.user_id.as_str())
    }
}

/// Mixes users across tasks: every combination of one record per task.
/// Users are taken in sorted order and T3 varies fastest, so with `u`
/// users there are `u^3` interactions and each record appears in `u^2`.
pub fn combinatorial_interactions<'a>(grid: &'a RecordGrid, scenario: &str) -> Result<Vec<Interaction<'a>>, EvalError> {
    let users = grid.users(scenario);
    if users.is_empty() {
        return Err(EvalError::EmptyScenario(scenario.into()));
    }
    let mut columns: Vec<Vec<&TurnRecord>> = Vec::with_capacity(3);
    for task in TaskId::ALL {
        let mut col = Vec::with_capacity(users.len());
        for user in &users {
            col.push(grid.get(user, scenario, task).ok_or_else(|| EvalError::MissingCell {
                user: user.to_string(),
                scenario: scenario.into(),
                task,
            })?);
        }
        columns.push(col);
    }
    let sizes = [users.len(); 3];
    Ok(odometer(&sizes)
        .into_iter()
        .enumerate()
        .map(|(index, ix)| Interaction {
            index,
            records: [columns[0][ix[0]], columns[1][ix[1]], columns[2][ix[2]]],
        })
        .collect())
}

/// Correct when the turn completed and its `required_objects` contain
/// every target.
pub fn score_turn(turn: &AgentTurn, task: &TaskSpec) -> bool {
    if !turn.is_scoreable() {
        return false;
    }
    let required = turn.required_objects.as_deref().unwrap_or_default();
    task.targets.iter().all(|t| required.contains(t))
}

/// Percent of dwell per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeDistribution {
    pub robot: f64,
    pub targets: f64,
    pub distractors: f64,
    pub irrelevant: f64,
}

impl GazeDistribution {
    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Robot => self.robot,
            Category::Targets => self.targets,
            Category::Distractors => self.distractors,
            Category::Irrelevant => self.irrelevant,
        }
    }

    fn get_mut(&mut self, c: Category) -> &mut f64 {
        match c {
            Category::Robot => &mut self.robot,
            Category::Targets => &mut self.targets,
            Category::Distractors => &mut self.distractors,
            Category::Irrelevant => &mut self.irrelevant,
        }
    }

    pub fn total(&self) -> f64 {
        Category::ALL.iter().map(|c| self.get(*c)).sum()
    }

    /// Component-wise mean; `None` for an empty input.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a GazeDistribution>) -> Option<GazeDistribution> {
        let mut acc = GazeDistribution::default();
        let mut n = 0usize;
        for d in items {
            for c in Category::ALL {
                *acc.get_mut(c) += d.get(c);
            }
            n += 1;
        }
        (n > 0).then(|| {
            for c in Category::ALL {
                *acc.get_mut(c) /= n as f64;
            }
            acc
        })
    }
}

/// Splits each segment's dwell evenly over its objects, sums per category
/// and normalizes to percent of the total dwell.
pub fn gaze_distribution(history: &GazeHistory, task: &TaskSpec, robot_id: &str) -> Result<GazeDistribution, EvalError> {
    let mut dist = GazeDistribution::default();
    let mut total = 0.0;
    for seg in &history.segments {
        if seg.object_ids.is_empty() {
            continue;
        }
        let share = seg.duration_ms / seg.object_ids.len() as f64;
        for id in &seg.object_ids {
            let cat = task
                .category_of(id, robot_id)
                .ok_or_else(|| EvalError::UncategorizedObject {
                    id: id.clone(),
                    scenario: task.scenario.clone(),
                    task: task.task,
                })?;
            *dist.get_mut(cat) += share;
        }
        total += seg.duration_ms;
    }
    if !(total > 0.0) {
        return Err(EvalError::ZeroDwell);
    }
    for c in Category::ALL {
        *dist.get_mut(c) *= 100.0 / total;
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::builtin_scenarios;
    use crate::segmentation::FixationSegment;

    #[test]
    fn odometer_matches_nested_loops() {
        let mut expected = Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    expected.push(vec![i, j, k]);
                }
            }
        }
        assert_eq!(odometer(&[2, 3, 2]), expected);
        assert_eq!(odometer(&[7, 7, 7]).len(), 343);
        assert!(odometer(&[3, 0]).is_empty());
        assert_eq!(odometer(&[]), vec![Vec::<usize>::new()]);
    }

    fn history(segs: &[(&[&str], f64)]) -> GazeHistory {
        let mut t = 0.0;
        GazeHistory {
            window_start_ms: 0.0,
            window_end_ms: 10_000.0,
            segments: segs
                .iter()
                .map(|(ids, d)| {
                    let s = FixationSegment::new(ids.iter().map(|s| s.to_string()).collect(), t, *d);
                    t += d;
                    s
                })
                .collect(),
        }
    }

    #[test]
    fn distribution_examples() {
        let (b, _) = builtin_scenarios();
        let t1 = b.task(TaskId::T1);
        let d = gaze_distribution(&history(&[(&["cereal_box"], 1000.0)]), t1, "the_robot").unwrap();
        assert_eq!(d.targets, 100.0);
        let d = gaze_distribution(&history(&[(&["bowl", "small_bowl"], 1000.0)]), t1, "the_robot").unwrap();
        assert_eq!((d.targets, d.distractors), (50.0, 50.0));
        assert_eq!(
            gaze_distribution(&history(&[]), t1, "the_robot"),
            Err(EvalError::ZeroDwell)
        );
        assert!(matches!(
            gaze_distribution(&history(&[(&["spoon"], 10.0)]), t1, "the_robot"),
            Err(EvalError::UncategorizedObject { .. })
        ));
    }
}
