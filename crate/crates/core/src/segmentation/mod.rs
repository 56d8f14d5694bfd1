//! Gaze-history computation: saccade suppression, fixation segments and
//! temporal merging over a stream of ranked frames.
//!
//! A frame's *candidate set* is every object within the angular threshold,
//! in ascending-angle order. Runs of consecutive frames with the same
//! candidate membership form fixation segments. Frames removed by saccade
//! suppression and frames with an empty candidate set terminate a run.
//!
//! Duration convention: a run spanning frames `first..=last` lasts
//! `t[last] - t[first] + period`, where `period` is the median of all
//! inter-frame gaps observed up to and including frame `last`. The result
//! is capped so the segment never extends past the next frame or the end
//! of the window. Gaps are measured on the unfiltered frame stream, so a
//! streaming consumer can compute the same value without lookahead.

mod streaming;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    angular_speed, GeometryError, HeadPoseSample, RankedFrame, Scene, SceneRanker,
};

pub use streaming::{SegmenterEvent, StreamingSegmenter};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("frames not strictly time-ordered at index {index} ({prev_ms} ms then {curr_ms} ms)")]
    Unsorted {
        index: usize,
        prev_ms: f64,
        curr_ms: f64,
    },
    #[error("frames and poses are misaligned at index {index}")]
    Misaligned { index: usize },
    #[error("segments overlap or are out of order at index {index}")]
    Overlapping { index: usize },
    #[error("invalid parameter {name}: {value} (must be strictly positive)")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Parameters for gaze-history computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    pub angular_threshold_deg: f64,
    pub min_fixation_ms: f64,
    pub sample_spacing_mm: f64,
    pub merge_window_ms: f64,
    /// Head speed above which a sample is treated as part of a fast gaze
    /// shift and dropped.
    pub saccade_speed_threshold_deg_per_s: f64,
}

impl SegmentationParams {
    pub const DEFAULT_ANGULAR_THRESHOLD_DEG: f64 = 8.0;
    pub const DEFAULT_MIN_FIXATION_MS: f64 = 100.0;
    pub const DEFAULT_SAMPLE_SPACING_MM: f64 = 5.0;
    pub const DEFAULT_MERGE_WINDOW_MS: f64 = 160.0;
    pub const DEFAULT_SACCADE_SPEED_DEG_PER_S: f64 = 120.0;

    pub fn validate(&self) -> Result<(), SegmentationError> {
        let fields = [
            ("angular_threshold_deg", self.angular_threshold_deg),
            ("min_fixation_ms", self.min_fixation_ms),
            ("sample_spacing_mm", self.sample_spacing_mm),
            ("merge_window_ms", self.merge_window_ms),
            (
                "saccade_speed_threshold_deg_per_s",
                self.saccade_speed_threshold_deg_per_s,
            ),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SegmentationError::InvalidParam { name, value });
            }
        }
        Ok(())
    }
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            angular_threshold_deg: Self::DEFAULT_ANGULAR_THRESHOLD_DEG,
            min_fixation_ms: Self::DEFAULT_MIN_FIXATION_MS,
            sample_spacing_mm: Self::DEFAULT_SAMPLE_SPACING_MM,
            merge_window_ms: Self::DEFAULT_MERGE_WINDOW_MS,
            saccade_speed_threshold_deg_per_s: Self::DEFAULT_SACCADE_SPEED_DEG_PER_S,
        }
    }
}

/// Closed time interval in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl TimeWindow {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_ms && t <= self.end_ms
    }

    pub fn intersects(&self, other: &TimeWindow) -> bool {
        self.start_ms <= other.end_ms && other.start_ms <= self.end_ms
    }
}

/// Object(s) most likely fixated and the dwell time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSegment {
    /// Decreasing likelihood, i.e. ascending angle at segment formation.
    pub object_ids: Vec<String>,
    pub start_ms: f64,
    /// Dwell time. For merged segments this is the sum of the constituents,
    /// so it excludes the gaps between them.
    pub duration_ms: f64,
    /// Wall-clock end of the last constituent.
    pub end_ms: f64,
}

impl FixationSegment {
    pub fn new(object_ids: Vec<String>, start_ms: f64, duration_ms: f64) -> Self {
        Self {
            object_ids,
            start_ms,
            duration_ms,
            end_ms: start_ms + duration_ms,
        }
    }

    pub fn membership(&self) -> BTreeSet<&str> {
        self.object_ids.iter().map(String::as_str).collect()
    }

    pub fn same_objects(&self, other: &FixationSegment) -> bool {
        self.membership() == other.membership()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeHistory {
    pub window_start_ms: f64,
    pub window_end_ms: f64,
    pub segments: Vec<FixationSegment>,
}

impl GazeHistory {
    pub fn empty(window: TimeWindow) -> Self {
        Self {
            window_start_ms: window.start_ms,
            window_end_ms: window.end_ms,
            segments: Vec::new(),
        }
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow::new(self.window_start_ms, self.window_end_ms)
    }

    pub fn total_dwell_ms(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_ms).sum()
    }

    /// Whether `id` appears in any segment.
    pub fn mentions(&self, id: &str) -> bool {
        self.segments
            .iter()
            .any(|s| s.object_ids.iter().any(|o| o == id))
    }
}

/// Objects within the angular threshold, in ascending-angle order.
pub fn candidate_set(frame: &RankedFrame, params: &SegmentationParams) -> Vec<String> {
    frame
        .entries
        .iter()
        .take_while(|e| e.angle_deg <= params.angular_threshold_deg)
        .map(|e| e.object_id.clone())
        .collect()
}

/// Per-pose suppression flags: `true` where the head speed relative to the
/// previously retained pose exceeds the saccade threshold. The first pose
/// is always retained.
pub fn saccade_mask(
    poses: &[HeadPoseSample],
    params: &SegmentationParams,
) -> Result<Vec<bool>, SegmentationError> {
    let mut mask = Vec::with_capacity(poses.len());
    let mut retained: Option<&HeadPoseSample> = None;
    for (index, pose) in poses.iter().enumerate() {
        let suppressed = match retained {
            None => false,
            Some(prev) => {
                let speed = angular_speed(prev, pose).map_err(|_| SegmentationError::Unsorted {
                    index,
                    prev_ms: prev.timestamp_ms,
                    curr_ms: pose.timestamp_ms,
                })?;
                speed > params.saccade_speed_threshold_deg_per_s
            }
        };
        if !suppressed {
            retained = Some(pose);
        }
        mask.push(suppressed);
    }
    Ok(mask)
}

fn check_aligned(frames: &[RankedFrame], poses: &[HeadPoseSample]) -> Result<(), SegmentationError> {
    if frames.len() != poses.len() {
        return Err(SegmentationError::Misaligned {
            index: frames.len().min(poses.len()),
        });
    }
    match frames
        .iter()
        .zip(poses)
        .position(|(f, p)| f.timestamp_ms != p.timestamp_ms)
    {
        Some(index) => Err(SegmentationError::Misaligned { index }),
        None => Ok(()),
    }
}

/// Drops frames recorded during fast head rotations.
pub fn suppress_saccades(
    frames: &[RankedFrame],
    poses: &[HeadPoseSample],
    params: &SegmentationParams,
) -> Result<Vec<RankedFrame>, SegmentationError> {
    check_aligned(frames, poses)?;
    let mask = saccade_mask(poses, params)?;
    Ok(frames
        .iter()
        .zip(mask)
        .filter(|(_, suppressed)| !suppressed)
        .map(|(f, _)| f.clone())
        .collect())
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

pub(crate) fn insert_sorted(sorted: &mut Vec<f64>, value: f64) {
    let pos = sorted.partition_point(|&g| g.total_cmp(&value).is_le());
    sorted.insert(pos, value);
}

/// Duration of a run per the module-level convention.
pub(crate) fn run_duration(
    first_ms: f64,
    last_ms: f64,
    period_ms: f64,
    next_ms: Option<f64>,
    window_end_ms: Option<f64>,
) -> f64 {
    let mut duration = (last_ms - first_ms) + period_ms;
    if let Some(next) = next_ms {
        duration = duration.min(next - first_ms);
    }
    if let Some(end) = window_end_ms {
        duration = duration.min(end - first_ms);
    }
    duration.max(0.0)
}

/// Timestamp plus candidate set; suppressed frames carry an empty set.
pub(crate) struct FrameKey {
    pub timestamp_ms: f64,
    pub candidates: Vec<String>,
}

fn sorted_membership(ids: &[String]) -> Vec<&str> {
    let mut m: Vec<&str> = ids.iter().map(String::as_str).collect();
    m.sort_unstable();
    m
}

pub(crate) fn segment_keys(
    keys: &[FrameKey],
    params: &SegmentationParams,
    window_end_ms: Option<f64>,
) -> Result<Vec<FixationSegment>, SegmentationError> {
    for (index, w) in keys.windows(2).enumerate() {
        if !(w[1].timestamp_ms > w[0].timestamp_ms) {
            return Err(SegmentationError::Unsorted {
                index: index + 1,
                prev_ms: w[0].timestamp_ms,
                curr_ms: w[1].timestamp_ms,
            });
        }
    }

    let mut segments = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut start = 0usize;
    while start < keys.len() {
        if start > 0 {
            insert_sorted(&mut gaps, keys[start].timestamp_ms - keys[start - 1].timestamp_ms);
        }
        let membership = sorted_membership(&keys[start].candidates);
        let mut last = start;
        while last + 1 < keys.len() && sorted_membership(&keys[last + 1].candidates) == membership {
            last += 1;
            insert_sorted(&mut gaps, keys[last].timestamp_ms - keys[last - 1].timestamp_ms);
        }
        if !membership.is_empty() {
            let first_ms = keys[start].timestamp_ms;
            let duration = run_duration(
                first_ms,
                keys[last].timestamp_ms,
                median(&gaps),
                keys.get(last + 1).map(|k| k.timestamp_ms),
                window_end_ms,
            );
            if duration >= params.min_fixation_ms {
                segments.push(FixationSegment::new(
                    keys[start].candidates.clone(),
                    first_ms,
                    duration,
                ));
            }
        }
        start = last + 1;
    }
    Ok(segments)
}

/// Forms fixation segments from time-ordered, already-suppressed frames.
pub fn segment_fixations(
    frames: &[RankedFrame],
    params: &SegmentationParams,
) -> Result<Vec<FixationSegment>, SegmentationError> {
    let keys: Vec<FrameKey> = frames
        .iter()
        .map(|f| FrameKey {
            timestamp_ms: f.timestamp_ms,
            candidates: candidate_set(f, params),
        })
        .collect();
    segment_keys(&keys, params, None)
}

const OVERLAP_TOLERANCE_MS: f64 = 1e-6;

/// Merges consecutive segments over the same objects whose gap is within
/// the merge window. Chains collapse left to right; the merged duration is
/// the sum of the constituents.
pub fn merge_segments(
    segments: &[FixationSegment],
    params: &SegmentationParams,
) -> Result<Vec<FixationSegment>, SegmentationError> {
    for (index, w) in segments.windows(2).enumerate() {
        // start + (next - start) can round a hair past next
        if w[1].start_ms < w[0].end_ms - OVERLAP_TOLERANCE_MS {
            return Err(SegmentationError::Overlapping { index: index + 1 });
        }
    }
    let mut merged: Vec<FixationSegment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match merged.last_mut() {
            Some(prev) if prev.same_objects(seg) && seg.start_ms - prev.end_ms <= params.merge_window_ms => {
                prev.duration_ms += seg.duration_ms;
                prev.end_ms = seg.end_ms;
            }
            _ => merged.push(seg.clone()),
        }
    }
    Ok(merged)
}

/// Runs the full pipeline (rank, suppress, segment, merge) over the poses
/// that fall inside `window`.
pub fn build_gaze_history(
    poses: &[HeadPoseSample],
    scene: &Scene,
    window: TimeWindow,
    params: &SegmentationParams,
) -> Result<GazeHistory, SegmentationError> {
    params.validate()?;
    let in_window: Vec<HeadPoseSample> = poses
        .iter()
        .filter(|p| window.contains(p.timestamp_ms))
        .copied()
        .collect();
    if in_window.is_empty() {
        return Ok(GazeHistory::empty(window));
    }
    let ranker = SceneRanker::new(scene, params.sample_spacing_mm)?;
    build_gaze_history_with(&ranker, &in_window, window, params)
}

/// Like [`build_gaze_history`] with a prebuilt ranker; `poses` must already
/// be restricted to the window.
pub fn build_gaze_history_with(
    ranker: &SceneRanker,
    poses: &[HeadPoseSample],
    window: TimeWindow,
    params: &SegmentationParams,
) -> Result<GazeHistory, SegmentationError> {
    let mask = saccade_mask(poses, params)?;
    let keys = poses
        .iter()
        .zip(&mask)
        .map(|(pose, &suppressed)| {
            let candidates = if suppressed {
                Vec::new()
            } else {
                candidate_set(&ranker.rank(pose)?, params)
            };
            Ok(FrameKey {
                timestamp_ms: pose.timestamp_ms,
                candidates,
            })
        })
        .collect::<Result<Vec<_>, SegmentationError>>()?;
    let raw = segment_keys(&keys, params, Some(window.end_ms))?;
    Ok(GazeHistory {
        window_start_ms: window.start_ms,
        window_end_ms: window.end_ms,
        segments: merge_segments(&raw, params)?,
    })
}
