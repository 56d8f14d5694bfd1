//! Synthetic head-pose traces and turn records.
//!
//! A trace follows a [`GazePlan`]: hold the head on a point of each object
//! for its dwell time with small per-frame jitter, then turn to the next
//! object at 300 °/s. The fast turns fall under saccadic suppression, so
//! the resulting gaze history only contains the planned objects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, RecordGrid, Scenario, TaskId, TurnRecord};
use crate::geometry::{HeadPoseSample, Scene, Vec3};
use crate::io::{TraceFile, TraceHeader, FORMAT_VERSION};
use crate::scanpath::{compose, Utterance, Word};
use crate::segmentation::{build_gaze_history, SegmentationError, SegmentationParams, TimeWindow};

const TURN_SPEED_DEG_PER_S: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazePlan {
    /// Object id and dwell in milliseconds, in order.
    pub fixations: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    /// Sampling rate range; each record draws one rate.
    pub rate_hz: (f64, f64),
    /// Timestamp jitter as a fraction of the period (below 0.5).
    pub jitter: f64,
    pub noise_deg: f64,
    pub robot_dwell_ms: (f64, f64),
    pub target_dwell_ms: (f64, f64),
    /// Probability of inserting a glance at a non-target object.
    pub glance_prob: f64,
    pub glance_dwell_ms: (f64, f64),
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            rate_hz: (30.0, 60.0),
            jitter: 0.2,
            noise_deg: 0.3,
            robot_dwell_ms: (700.0, 1000.0),
            target_dwell_ms: (1000.0, 1400.0),
            glance_prob: 0.0,
            glance_dwell_ms: (400.0, 900.0),
        }
    }
}

impl SynthOptions {
    fn validate(&self) -> Result<(), EvalError> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !range_ok(self.rate_hz)
            || !range_ok(self.robot_dwell_ms)
            || !range_ok(self.target_dwell_ms)
            || !range_ok(self.glance_dwell_ms)
        {
            return Err(EvalError::InvalidOption("ranges must be positive and ordered".into()));
        }
        if !(0.0..0.5).contains(&self.jitter) || !(0.0..=1.0).contains(&self.glance_prob) || self.noise_deg < 0.0 {
            return Err(EvalError::InvalidOption(
                "jitter must be in [0, 0.5), glance_prob in [0, 1], noise_deg >= 0".into(),
            ));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Stable seed per (user, scenario, task) so records do not depend on
/// generation order.
fn cell_seed(base: u64, user: &str, scenario: &str, task: TaskId) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for b in user.bytes().chain([0]).chain(scenario.bytes()).chain([0, task.index() as u8]) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn jittered(dir: Vec3, rng: &mut ChaCha8Rng, noise_deg: f64) -> Vec3 {
    if noise_deg == 0.0 {
        return dir;
    }
    let s = noise_deg.to_radians().tan();
    let n = Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    let perp = n - dir * dir.dot(n);
    (dir + perp).normalized().unwrap_or(dir)
}

/// Head poses following `plan` from `viewer`.
pub fn trace_from_plan(
    plan: &GazePlan,
    scene: &Scene,
    viewer: Vec3,
    rate_hz: f64,
    options: &SynthOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<HeadPoseSample>, EvalError> {
    let period = 1000.0 / rate_hz;
    // Piecewise schedule: (end time, start direction, end direction).
    let mut legs: Vec<(f64, f64, Vec3, Vec3)> = Vec::new();
    let mut t = 0.0;
    let mut current: Option<Vec3> = None;
    for (id, dwell) in &plan.fixations {
        let obj = scene
            .get(id)
            .ok_or_else(|| EvalError::InvalidOption(format!("plan references unknown object {id:?}")))?;
        let ext = obj.aabb.extent();
        let point = obj.aabb.center()
            + Vec3::new(
                draw(rng, (-0.2, 0.2)) * ext.x,
                draw(rng, (-0.2, 0.2)) * ext.y,
                draw(rng, (-0.2, 0.2)) * ext.z,
            );
        let dir = (point - viewer)
            .normalized()
            .ok_or_else(|| EvalError::InvalidOption(format!("viewer is inside {id:?}")))?;
        if let Some(prev) = current {
            let turn_ms = (prev.angle_deg(dir) / TURN_SPEED_DEG_PER_S * 1000.0).max(period);
            legs.push((t, t + turn_ms, prev, dir));
            t += turn_ms;
        }
        legs.push((t, t + dwell, dir, dir));
        t += dwell;
        current = Some(dir);
    }
    let mut poses = Vec::new();
    let mut k = 0usize;
    let mut leg = 0usize;
    loop {
        let jitter = if options.jitter > 0.0 {
            draw(rng, (-options.jitter, options.jitter)) * period
        } else {
            0.0
        };
        let ts = (k as f64 * period + if k == 0 { 0.0 } else { jitter }).max(0.0);
        if ts > t {
            break;
        }
        while leg + 1 < legs.len() && ts > legs[leg].1 {
            leg += 1;
        }
        let (start, end, a, b) = legs[leg];
        let u = if end > start { ((ts - start) / (end - start)).clamp(0.0, 1.0) } else { 1.0 };
        let dir = (a * (1.0 - u) + b * u).normalized().unwrap_or(b);
        let dir = if a == b { jittered(dir, rng, options.noise_deg) } else { dir };
        poses.push(HeadPoseSample::new(ts, viewer, dir).expect("normalized direction"));
        k += 1;
    }
    Ok(poses)
}

/// Evenly timed word stamps for `text` starting at `start_ms`.
fn words_for(text: &str, start_ms: f64) -> Vec<Word> {
    let mut t = start_ms;
    text.split_whitespace()
        .map(|token| {
            let dur = 120.0 + 40.0 * token.chars().count() as f64;
            let w = Word {
                token: token.to_string(),
                start_ms: t,
                end_ms: t + dur,
            };
            t += dur + 60.0;
            w
        })
        .collect()
}

fn plan_for(scenario: &Scenario, task: TaskId, options: &SynthOptions, rng: &mut ChaCha8Rng) -> GazePlan {
    let spec = scenario.task(task);
    let mut fixations = vec![(scenario.robot_id().to_string(), draw(rng, options.robot_dwell_ms))];
    let others: Vec<&String> = spec.distractors.iter().chain(&spec.irrelevant).collect();
    for target in &spec.targets {
        if !others.is_empty() && options.glance_prob > 0.0 && rng.random_bool(options.glance_prob) {
            let other = others[rng.random_range(0..others.len())];
            fixations.push((other.clone(), draw(rng, options.glance_dwell_ms)));
        }
        fixations.push((target.clone(), draw(rng, options.target_dwell_ms)));
    }
    GazePlan { fixations }
}

/// A synthetic turn: the trace, the utterance and the resulting record.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoFixture {
    pub scenario: Scenario,
    pub task: TaskId,
    pub trace: TraceFile,
    pub utterance: Utterance,
    pub record: TurnRecord,
}

/// Builds one record by running the real gaze pipeline over a synthetic
/// trace for `user_id`.
pub fn synthesize_record(
    scenario: &Scenario,
    task: TaskId,
    user_id: &str,
    seed: u64,
    options: &SynthOptions,
    params: &SegmentationParams,
) -> Result<DemoFixture, EvalError> {
    options.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, user_id, &scenario.id, task));
    let rate = draw(&mut rng, options.rate_hz);
    let plan = plan_for(scenario, task, options, &mut rng);
    let poses = trace_from_plan(&plan, &scenario.scene, scenario.viewer, rate, options, &mut rng)?;
    let trace_end = poses.last().map_or(0.0, |p| p.timestamp_ms);
    let speech_start = plan.fixations[0].1 + 100.0;
    let text = scenario.task(task).utterance_text();
    let words = words_for(&text, speech_start);
    let end = trace_end.max(words.last().map_or(0.0, |w| w.end_ms));
    let window = TimeWindow::new(0.0, end);
    let utterance = Utterance::new(text, window).with_words(words);
    let history = build_gaze_history(&poses, &scenario.scene, window, params).map_err(seg_err)?;
    let scanpath = compose(utterance.clone(), history).expect("same window");
    let record = TurnRecord {
        user_id: user_id.to_string(),
        scenario: scenario.id.clone(),
        task,
        scanpath,
        agent_turn: None,
    };
    let header = TraceHeader {
        format_version: FORMAT_VERSION,
        frame_rate_hz: Some(rate),
        user_id: Some(user_id.to_string()),
        scenario: Some(scenario.id.clone()),
        ..TraceHeader::default()
    };
    Ok(DemoFixture {
        scenario: scenario.clone(),
        task,
        trace: TraceFile::new(header, poses),
        utterance,
        record,
    })
}

fn seg_err(e: SegmentationError) -> EvalError {
    EvalError::InvalidOption(format!("synthetic trace failed segmentation: {e}"))
}

/// Records for users `u1..=u<n>` over every task of each scenario.
pub fn synthesize_grid(
    scenarios: &[&Scenario],
    users: usize,
    seed: u64,
    options: &SynthOptions,
    params: &SegmentationParams,
) -> Result<RecordGrid, EvalError> {
    let mut grid = RecordGrid::default();
    for scenario in scenarios {
        for u in 1..=users {
            for task in TaskId::ALL {
                let f = synthesize_record(scenario, task, &format!("u{u}"), seed, options, params)?;
                grid.insert(f.record);
            }
        }
    }
    Ok(grid)
}

/// The bundled clean fixture used by the demo command.
pub fn demo_fixture(scenario: &Scenario, task: TaskId) -> Result<DemoFixture, EvalError> {
    synthesize_record(
        scenario,
        task,
        "demo",
        0,
        &SynthOptions::default(),
        &SegmentationParams::default(),
    )
}
