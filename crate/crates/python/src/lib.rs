//! Python bindings. Structured values (histories, scanpaths, transcripts)
//! cross the boundary as plain dicts and lists with the same shape as the
//! JSON files.

use std::sync::Arc;

use gazeground_core::agent::{backend_from_name, build_tool_registry, AgentConfig, AgentSession, ReplayScript, TurnTranscript};
use gazeground_core::eval::{self, builtin_scenario, demo_fixture, EvalCondition, TaskId, SCENARIO_IDS};
use gazeground_core::geometry::{HeadPoseSample, Scene, SceneRanker, Vec3};
use gazeground_core::io::{parse_scene_str, SceneFile};
use gazeground_core::scanpath::{compose, parse_prompt_text, render_prompt_text, scanpath_from_poses, SemanticScanpath, Utterance};
use gazeground_core::segmentation::{self, build_gaze_history_with, FixationSegment, GazeHistory, StreamingSegmenter, TimeWindow};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// Gaze-history parameters; defaults are the published values.
#[pyclass(name = "SegmentationParams", eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyParams(segmentation::SegmentationParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (
        angular_threshold_deg = 8.0,
        min_fixation_ms = 100.0,
        sample_spacing_mm = 5.0,
        merge_window_ms = 160.0,
        saccade_speed_threshold_deg_per_s = 120.0,
    ))]
    fn new(
        angular_threshold_deg: f64,
        min_fixation_ms: f64,
        sample_spacing_mm: f64,
        merge_window_ms: f64,
        saccade_speed_threshold_deg_per_s: f64,
    ) -> PyResult<Self> {
        let p = segmentation::SegmentationParams {
            angular_threshold_deg,
            min_fixation_ms,
            sample_spacing_mm,
            merge_window_ms,
            saccade_speed_threshold_deg_per_s,
        };
        p.validate().map_err(value_err)?;
        Ok(Self(p))
    }

    #[getter]
    fn angular_threshold_deg(&self) -> f64 {
        self.0.angular_threshold_deg
    }

    #[getter]
    fn min_fixation_ms(&self) -> f64 {
        self.0.min_fixation_ms
    }

    #[getter]
    fn sample_spacing_mm(&self) -> f64 {
        self.0.sample_spacing_mm
    }

    #[getter]
    fn merge_window_ms(&self) -> f64 {
        self.0.merge_window_ms
    }

    #[getter]
    fn saccade_speed_threshold_deg_per_s(&self) -> f64 {
        self.0.saccade_speed_threshold_deg_per_s
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "SegmentationParams(angular_threshold_deg={}, min_fixation_ms={}, sample_spacing_mm={}, merge_window_ms={}, saccade_speed_threshold_deg_per_s={})",
            p.angular_threshold_deg, p.min_fixation_ms, p.sample_spacing_mm, p.merge_window_ms, p.saccade_speed_threshold_deg_per_s
        )
    }
}

fn params_or_default(params: Option<PyParams>) -> segmentation::SegmentationParams {
    params.map(|p| p.0).unwrap_or_default()
}

fn load_scene(scene_json: Option<&str>, scenario: &str) -> PyResult<Scene> {
    match scene_json {
        Some(text) => Ok(parse_scene_str(text, "scene").map_err(value_err)?.0),
        None => Ok(builtin_scenario(scenario).map_err(value_err)?.scene),
    }
}

/// Live gaze tracking over one scene: ranks poses, segments them as they
/// arrive and keeps them for batch histories.
#[pyclass(name = "GazeTracker")]
struct PyGazeTracker {
    params: segmentation::SegmentationParams,
    ranker: SceneRanker,
    object_ids: Vec<String>,
    segmenter: Option<StreamingSegmenter>,
    poses: Vec<HeadPoseSample>,
}

impl PyGazeTracker {
    fn pose(&self, t: f64, origin: [f64; 3], forward: [f64; 3]) -> PyResult<HeadPoseSample> {
        HeadPoseSample::new(t, vec3(origin), vec3(forward)).map_err(value_err)
    }
}

#[pymethods]
impl PyGazeTracker {
    /// `scene` is scene-file JSON; without it the built-in `scenario` scene
    /// is used.
    #[new]
    #[pyo3(signature = (scene = None, scenario = "breakfast", params = None))]
    fn new(scene: Option<&str>, scenario: &str, params: Option<PyParams>) -> PyResult<Self> {
        let scene = load_scene(scene, scenario)?;
        let params = params_or_default(params);
        let ranker = SceneRanker::new(&scene, params.sample_spacing_mm).map_err(value_err)?;
        Ok(Self {
            params,
            ranker,
            object_ids: scene.ids().map(String::from).collect(),
            segmenter: Some(StreamingSegmenter::new(params)),
            poses: Vec::new(),
        })
    }

    #[getter]
    fn object_ids(&self) -> Vec<String> {
        self.object_ids.clone()
    }

    /// `(object_id, angle_deg)` pairs, closest first.
    fn rank(&self, t: f64, origin: [f64; 3], forward: [f64; 3]) -> PyResult<Vec<(String, f64)>> {
        let frame = self.ranker.rank(&self.pose(t, origin, forward)?).map_err(value_err)?;
        Ok(frame.entries.into_iter().map(|e| (e.object_id, e.angle_deg)).collect())
    }

    /// Feeds one pose; returns segment events as dicts.
    fn push<'py>(&mut self, py: Python<'py>, t: f64, origin: [f64; 3], forward: [f64; 3]) -> PyResult<Bound<'py, PyAny>> {
        let pose = self.pose(t, origin, forward)?;
        let frame = self.ranker.rank(&pose).map_err(value_err)?;
        let segmenter = self
            .segmenter
            .as_mut()
            .ok_or_else(|| PyRuntimeError::new_err("tracker already finalized"))?;
        let events = segmenter.push(&pose, &frame).map_err(value_err)?;
        self.poses.push(pose);
        to_py(py, &events)
    }

    /// Closes the open run; returns the merged segments.
    fn finalize<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let segmenter = self
            .segmenter
            .take()
            .ok_or_else(|| PyRuntimeError::new_err("tracker already finalized"))?;
        to_py(py, &segmenter.finalize().0)
    }

    /// Batch gaze history over the stored poses in `[start_ms, end_ms]`.
    fn history<'py>(&self, py: Python<'py>, start_ms: f64, end_ms: f64) -> PyResult<Bound<'py, PyAny>> {
        let window = TimeWindow::new(start_ms, end_ms);
        let poses: Vec<HeadPoseSample> = self.poses.iter().filter(|p| window.contains(p.timestamp_ms)).copied().collect();
        let history = if poses.is_empty() {
            GazeHistory::empty(window)
        } else {
            build_gaze_history_with(&self.ranker, &poses, window, &self.params).map_err(value_err)?
        };
        to_py(py, &history)
    }

    /// Scanpath for an utterance over the stored poses.
    #[pyo3(signature = (text, start_ms, end_ms))]
    fn scanpath<'py>(&self, py: Python<'py>, text: &str, start_ms: f64, end_ms: f64) -> PyResult<Bound<'py, PyAny>> {
        let utterance = Utterance::new(text, TimeWindow::new(start_ms, end_ms));
        let sp = scanpath_from_poses(&self.ranker, &self.poses, utterance, &self.params).map_err(value_err)?;
        to_py(py, &sp)
    }
}

/// Prompt block for a scanpath dict.
#[pyfunction]
fn render_scanpath(scanpath: &Bound<'_, PyAny>) -> PyResult<String> {
    let sp: SemanticScanpath = from_py(scanpath)?;
    Ok(render_prompt_text(&sp))
}

#[pyfunction]
fn parse_scanpath<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &parse_prompt_text(text).map_err(value_err)?)
}

/// Pairs an utterance dict with a gaze-history dict.
#[pyfunction]
fn compose_scanpath<'py>(py: Python<'py>, utterance: &Bound<'py, PyAny>, history: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let sp = compose(from_py(utterance)?, from_py(history)?).map_err(value_err)?;
    to_py(py, &sp)
}

#[pyfunction]
#[pyo3(signature = (segments, params = None))]
fn merge_segments<'py>(py: Python<'py>, segments: &Bound<'py, PyAny>, params: Option<PyParams>) -> PyResult<Bound<'py, PyAny>> {
    let segs: Vec<FixationSegment> = from_py(segments)?;
    let merged = segmentation::merge_segments(&segs, &params_or_default(params)).map_err(value_err)?;
    to_py(py, &merged)
}

/// `(statistic, p_value)` for `[[a, b], [c, d]]`.
#[pyfunction]
fn chi_square_2x2(a: f64, b: f64, c: f64, d: f64) -> PyResult<(f64, f64)> {
    let x = eval::chi_square_2x2(a, b, c, d).map_err(value_err)?;
    Ok((x.statistic, x.p_value))
}

/// `(ratio, corrected)`; `corrected` when a zero cell forced the +0.5 rule.
#[pyfunction]
fn odds_ratio(a: f64, b: f64, c: f64, d: f64) -> PyResult<(f64, bool)> {
    let r = eval::odds_ratio(a, b, c, d).map_err(value_err)?;
    Ok((r.ratio, r.corrected))
}

/// Scene-file dict of a built-in scenario.
#[pyfunction]
fn scene<'py>(py: Python<'py>, scenario: &str) -> PyResult<Bound<'py, PyAny>> {
    let s = builtin_scenario(scenario).map_err(value_err)?;
    to_py(py, &SceneFile::from_scene(&s.scene, Some(s.viewer)))
}

#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    SCENARIO_IDS.to_vec()
}

/// One agent turn on a prompt block. `script` is replay-script JSON; without
/// it the heuristic backend answers.
#[pyfunction]
#[pyo3(signature = (scanpath_text, scenario = "breakfast", scene_query = true, actions = true, script = None))]
fn run_turn<'py>(
    py: Python<'py>,
    scanpath_text: &str,
    scenario: &str,
    scene_query: bool,
    actions: bool,
    script: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let sp = parse_prompt_text(scanpath_text).map_err(value_err)?;
    let scene = load_scene(None, scenario)?;
    let backend = match script {
        Some(s) => backend_from_name("replay", Some(ReplayScript::from_json(s).map_err(value_err)?)),
        None => backend_from_name("heuristic", None),
    }
    .map_err(value_err)?;
    let transcript = py.detach(|| {
        let mut session = AgentSession::new(
            scene,
            build_tool_registry(EvalCondition { scene_query_enabled: scene_query }, actions),
            Arc::clone(&backend),
            AgentConfig::default(),
        );
        let turn = session.run_turn(&sp);
        TurnTranscript { turn_index: 0, scanpath: sp, turn }
    });
    to_py(py, &transcript)
}

/// The bundled interaction for `scenario`/`task` with the heuristic
/// backend and actions enabled.
#[pyfunction]
#[pyo3(signature = (scenario = "breakfast", task = "T1"))]
fn demo<'py>(py: Python<'py>, scenario: &str, task: &str) -> PyResult<Bound<'py, PyAny>> {
    let s = builtin_scenario(scenario).map_err(value_err)?;
    let task: TaskId = task.parse().map_err(PyValueError::new_err)?;
    let f = demo_fixture(&s, task).map_err(value_err)?;
    let params = segmentation::SegmentationParams::default();
    let ranker = SceneRanker::new(&s.scene, params.sample_spacing_mm).map_err(value_err)?;
    let sp = scanpath_from_poses(&ranker, &f.trace.samples, f.utterance, &params).map_err(value_err)?;
    let backend = backend_from_name("heuristic", None).map_err(value_err)?;
    let mut session = AgentSession::new(s.scene, build_tool_registry(EvalCondition::FULL, true), backend, AgentConfig::default());
    let turn = session.run_turn(&sp);
    to_py(py, &TurnTranscript { turn_index: 0, scanpath: sp, turn })
}

#[pymodule]
fn gazeground(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGazeTracker>()?;
    m.add_function(wrap_pyfunction!(render_scanpath, m)?)?;
    m.add_function(wrap_pyfunction!(parse_scanpath, m)?)?;
    m.add_function(wrap_pyfunction!(compose_scanpath, m)?)?;
    m.add_function(wrap_pyfunction!(merge_segments, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square_2x2, m)?)?;
    m.add_function(wrap_pyfunction!(odds_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(scene, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_turn, m)?)?;
    m.add_function(wrap_pyfunction!(demo, m)?)?;
    Ok(())
}
