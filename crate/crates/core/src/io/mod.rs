//! On-disk formats: head-pose traces, scene layouts, transcripts, gaze
//! histories and turn records.
//!
//! Traces and turn records are JSON lines. Every file carries a
//! `format_version`; versions newer than [`FORMAT_VERSION`] are rejected.
//! Coordinates are right-handed, +Z up, in meters; timestamps in
//! milliseconds.

mod orientation;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::eval::{RecordGrid, TurnRecord};
use crate::geometry::{GeometryError, HeadPoseSample, Scene, SceneObject, Vec3};
use crate::scanpath::Utterance;
use crate::segmentation::GazeHistory;

pub use orientation::{forward_from_euler_deg, forward_from_quaternion};

pub const FORMAT_VERSION: u32 = 1;
pub const COORDINATE_FRAME: &str = "right-handed, +Z up, meters; timestamps in ms";
/// Forward vectors further than this from unit norm are renormalized with
/// a warning.
pub const FORWARD_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{location}: format_version {found} is not supported (this build reads up to {FORMAT_VERSION})")]
    UnsupportedVersion { location: String, found: u64 },
    #[error("{location}: {source}")]
    Geometry {
        location: String,
        #[source]
        source: GeometryError,
    },
    #[error("{location}: timestamp {curr_ms} ms does not follow {prev_ms} ms")]
    NonMonotonic { location: String, prev_ms: f64, curr_ms: f64 },
    #[error("conflicting records for user {user:?}, scenario {scenario:?}, task {task}: {first} and {second}")]
    ConflictingRecords {
        user: String,
        scenario: String,
        task: String,
        first: PathBuf,
        second: PathBuf,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(location: impl Into<String>, message: impl ToString) -> IoError {
    IoError::Parse {
        location: location.into(),
        message: message.to_string(),
    }
}

/// Non-fatal issue found while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

fn check_version(value: &Value, location: &str) -> Result<(), IoError> {
    match value.get("format_version") {
        None => Err(parse_err(location, "missing format_version")),
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= FORMAT_VERSION as u64 => Ok(()),
            Some(n) => Err(IoError::UnsupportedVersion {
                location: location.to_string(),
                found: n,
            }),
            None => Err(parse_err(location, format!("format_version must be a positive integer, got {v}"))),
        },
    }
}

/// Parses a versioned JSON document.
fn from_versioned<T: DeserializeOwned>(text: &str, location: &str) -> Result<T, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(location, e))?;
    check_version(&value, location)?;
    serde_json::from_value(value).map_err(|e| parse_err(location, e))
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

// ---------------------------------------------------------------- traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default = "default_frame")]
    pub coordinate_frame: String,
    /// Nominal capture rate; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
}

fn default_units() -> String {
    "ms, m".to_string()
}

fn default_frame() -> String {
    COORDINATE_FRAME.to_string()
}

impl Default for TraceHeader {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            units: default_units(),
            coordinate_frame: default_frame(),
            frame_rate_hz: None,
            user_id: None,
            scenario: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub samples: Vec<HeadPoseSample>,
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    header: &'a TraceHeader,
}

#[derive(Serialize)]
struct SampleLine {
    t: f64,
    origin: Vec3,
    forward: Vec3,
}

/// A sample line. Orientation is given by exactly one of `forward`,
/// `quat` (`[w, x, y, z]`, head forward axis is +X) or `euler_deg`
/// (`[yaw, pitch, roll]`, Z-Y-X, positive pitch looks down).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleInput {
    t: f64,
    origin: Vec3,
    #[serde(default)]
    forward: Option<Vec3>,
    #[serde(default)]
    quat: Option<[f64; 4]>,
    #[serde(default)]
    euler_deg: Option<[f64; 3]>,
}

impl TraceFile {
    pub fn new(header: TraceHeader, samples: Vec<HeadPoseSample>) -> Self {
        Self { header, samples }
    }

    /// Serializes to JSON lines: the header, then one line per sample.
    /// Floats use the shortest representation that round-trips.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine {
            kind: "header",
            header: &self.header,
        })
        .expect("header serializes");
        out.push('\n');
        for s in &self.samples {
            let line = SampleLine {
                t: s.timestamp_ms,
                origin: s.origin,
                forward: s.forward,
            };
            out.push_str(&serde_json::to_string(&line).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, location: &str) -> Result<(Self, Vec<Warning>), IoError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, htext) = lines
            .next()
            .ok_or_else(|| parse_err(location, "empty trace file (missing header line)"))?;
        let hloc = format!("{location}:{hline}");
        let mut hvalue: Value = serde_json::from_str(htext).map_err(|e| parse_err(&hloc, e))?;
        if hvalue.get("type").and_then(Value::as_str) != Some("header") {
            return Err(parse_err(&hloc, "first line must be a header with \"type\": \"header\""));
        }
        check_version(&hvalue, &hloc)?;
        hvalue.as_object_mut().expect("checked object").remove("type");
        let header: TraceHeader = serde_json::from_value(hvalue).map_err(|e| parse_err(&hloc, e))?;

        let mut samples: Vec<HeadPoseSample> = Vec::new();
        let mut warnings = Vec::new();
        for (line, text) in lines {
            let loc = format!("{location}:{line}");
            let input: SampleInput = serde_json::from_str(text).map_err(|e| parse_err(&loc, e))?;
            let forward = match (input.forward, input.quat, input.euler_deg) {
                (Some(f), None, None) => f,
                (None, Some(q), None) => forward_from_quaternion(q).ok_or_else(|| parse_err(&loc, "zero quaternion"))?,
                (None, None, Some(e)) => forward_from_euler_deg(e),
                _ => {
                    return Err(parse_err(
                        &loc,
                        "exactly one of \"forward\", \"quat\" or \"euler_deg\" is required",
                    ))
                }
            };
            let norm = forward.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(IoError::Geometry {
                    location: loc,
                    source: GeometryError::NonUnitForward(norm),
                });
            }
            let forward = if (norm - 1.0).abs() > FORWARD_NORM_TOLERANCE {
                warnings.push(Warning {
                    code: "forward_renormalized".into(),
                    line: Some(line),
                    message: format!("forward vector norm {norm} renormalized to 1"),
                });
                forward * (1.0 / norm)
            } else if (norm - 1.0).abs() > 1e-9 {
                forward * (1.0 / norm)
            } else {
                forward
            };
            if let Some(prev) = samples.last() {
                if !(input.t > prev.timestamp_ms) {
                    return Err(IoError::NonMonotonic {
                        location: loc,
                        prev_ms: prev.timestamp_ms,
                        curr_ms: input.t,
                    });
                }
            }
            let sample = HeadPoseSample::new(input.t, input.origin, forward)
                .map_err(|source| IoError::Geometry { location: loc, source })?;
            samples.push(sample);
        }
        Ok((Self { header, samples }, warnings))
    }
}

pub fn load_trace(path: &Path) -> Result<(TraceFile, Vec<Warning>), IoError> {
    TraceFile::from_jsonl(&read(path)?, &path.display().to_string())
}

pub fn save_trace(path: &Path, trace: &TraceFile) -> Result<(), IoError> {
    write(path, &trace.to_jsonl())
}

// ---------------------------------------------------------------- scenes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub format_version: u32,
    pub name: String,
    #[serde(default = "default_frame")]
    pub coordinate_frame: String,
    /// Typical head position of the user, used by fixture generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewer: Option<Vec3>,
    pub objects: Vec<SceneObject>,
}

impl SceneFile {
    pub fn from_scene(scene: &Scene, viewer: Option<Vec3>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            name: scene.name.clone(),
            coordinate_frame: default_frame(),
            viewer,
            objects: scene.objects().to_vec(),
        }
    }

    /// Builds and fully validates the scene (ids, boxes, one robot AOI).
    pub fn into_scene(self, location: &str) -> Result<(Scene, Option<Vec3>), IoError> {
        let geo = |source| IoError::Geometry {
            location: location.to_string(),
            source,
        };
        let scene = Scene::new(self.name, self.objects).map_err(geo)?;
        scene.validate().map_err(geo)?;
        Ok((scene, self.viewer))
    }
}

pub fn parse_scene_str(text: &str, location: &str) -> Result<(Scene, Option<Vec3>), IoError> {
    from_versioned::<SceneFile>(text, location)?.into_scene(location)
}

pub fn load_scene(path: &Path) -> Result<Scene, IoError> {
    Ok(parse_scene_str(&read(path)?, &path.display().to_string())?.0)
}

pub fn save_scene(path: &Path, scene: &Scene, viewer: Option<Vec3>) -> Result<(), IoError> {
    write(path, &to_pretty(&SceneFile::from_scene(scene, viewer)))
}

// ------------------------------------------------ histories and transcripts

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    inner: T,
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn versioned<T: Serialize>(inner: &T) -> String {
    to_pretty(&Versioned {
        format_version: FORMAT_VERSION,
        inner,
    })
}

fn unversioned<T: DeserializeOwned>(text: &str, location: &str) -> Result<T, IoError> {
    Ok(from_versioned::<Versioned<T>>(text, location)?.inner)
}

pub fn history_to_string(history: &GazeHistory) -> String {
    versioned(history)
}

pub fn parse_history_str(text: &str, location: &str) -> Result<GazeHistory, IoError> {
    unversioned(text, location)
}

pub fn load_history(path: &Path) -> Result<GazeHistory, IoError> {
    parse_history_str(&read(path)?, &path.display().to_string())
}

pub fn save_history(path: &Path, history: &GazeHistory) -> Result<(), IoError> {
    write(path, &history_to_string(history))
}

pub fn transcript_to_string(utterance: &Utterance) -> String {
    versioned(utterance)
}

/// Parses and validates an utterance transcript (text, optional word
/// timestamps, turn window).
pub fn parse_transcript_str(text: &str, location: &str) -> Result<Utterance, IoError> {
    let utterance: Utterance = unversioned(text, location)?;
    utterance.validate().map_err(|e| parse_err(location, e))?;
    Ok(utterance)
}

pub fn load_transcript(path: &Path) -> Result<Utterance, IoError> {
    parse_transcript_str(&read(path)?, &path.display().to_string())
}

pub fn save_transcript(path: &Path, utterance: &Utterance) -> Result<(), IoError> {
    write(path, &transcript_to_string(utterance))
}

// ---------------------------------------------------------- turn records

pub fn record_to_line(record: &TurnRecord) -> String {
    serde_json::to_string(&Versioned {
        format_version: FORMAT_VERSION,
        inner: record,
    })
    .expect("record serializes")
}

pub fn records_to_jsonl(records: &[TurnRecord]) -> String {
    records.iter().map(|r| record_to_line(r) + "\n").collect()
}

pub fn parse_records_jsonl(text: &str, location: &str) -> Result<Vec<TurnRecord>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| unversioned(l, &format!("{location}:{}", i + 1)))
        .collect()
}

pub fn save_records(path: &Path, records: &[TurnRecord]) -> Result<(), IoError> {
    write(path, &records_to_jsonl(records))
}

/// Loads every `*.jsonl` file in `dir` into a grid keyed by user, scenario
/// and task. Identical duplicates collapse; differing ones are an error.
pub fn load_turn_records(dir: &Path) -> Result<RecordGrid, IoError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    files.sort();
    let mut grid = RecordGrid::default();
    let mut origin: BTreeMap<(String, String, String), PathBuf> = BTreeMap::new();
    for path in files {
        for record in parse_records_jsonl(&read(&path)?, &path.display().to_string())? {
            let key = (record.user_id.clone(), record.scenario.clone(), record.task.to_string());
            if let Some(existing) = grid.get(&record.user_id, &record.scenario, record.task) {
                if existing != &record {
                    let first = origin[&key].clone();
                    return Err(IoError::ConflictingRecords {
                        user: key.0,
                        scenario: key.1,
                        task: key.2,
                        first,
                        second: path.clone(),
                    });
                }
                continue;
            }
            origin.insert(key, path.clone());
            grid.insert(record);
        }
    }
    Ok(grid)
}

/// Writes one `<scenario>_<user>.jsonl` file per user and scenario.
pub fn save_turn_records(dir: &Path, grid: &RecordGrid) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut by_file: BTreeMap<PathBuf, Vec<TurnRecord>> = BTreeMap::new();
    for r in grid.records() {
        by_file
            .entry(dir.join(format!("{}_{}.jsonl", r.scenario, r.user_id)))
            .or_default()
            .push(r.clone());
    }
    for (path, records) in &by_file {
        save_records(path, records)?;
    }
    Ok(by_file.into_keys().collect())
}
