use serde::{Deserialize, Serialize};

use super::{
    candidate_set, insert_sorted, median, run_duration, FixationSegment, SegmentationError,
    SegmentationParams,
};
use crate::geometry::{angular_speed, HeadPoseSample, RankedFrame, Vec3};

/// Incremental notifications from the streaming segmenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmenterEvent {
    /// The current run reached the minimum fixation duration.
    Opened { object_ids: Vec<String>, start_ms: f64 },
    /// A qualifying run ended (before merging).
    Closed { segment: FixationSegment },
}

#[derive(Debug, Clone)]
struct Run {
    object_ids: Vec<String>,
    membership: Vec<String>,
    first_ms: f64,
    last_ms: f64,
    opened: bool,
}

/// Frame-at-a-time segmenter. Feeding a stream through [`push`] and then
/// calling [`finalize`] yields the same merged segments as the batch
/// pipeline over the same input.
///
/// [`push`]: StreamingSegmenter::push
/// [`finalize`]: StreamingSegmenter::finalize
#[derive(Debug, Clone)]
pub struct StreamingSegmenter {
    params: SegmentationParams,
    window_end_ms: Option<f64>,
    last_ms: Option<f64>,
    gaps: Vec<f64>,
    retained: Option<(f64, Vec3)>,
    run: Option<Run>,
    pending: Option<FixationSegment>,
    merged: Vec<FixationSegment>,
}

impl StreamingSegmenter {
    pub fn new(params: SegmentationParams) -> Self {
        Self {
            params,
            window_end_ms: None,
            last_ms: None,
            gaps: Vec::new(),
            retained: None,
            run: None,
            pending: None,
            merged: Vec::new(),
        }
    }

    /// Caps segment durations at `end_ms`, as the batch pipeline does for
    /// the end of its window.
    pub fn with_window_end(mut self, end_ms: f64) -> Self {
        self.window_end_ms = Some(end_ms);
        self
    }

    pub fn last_timestamp_ms(&self) -> Option<f64> {
        self.last_ms
    }

    /// Advances with one pose and its ranked frame.
    pub fn push(
        &mut self,
        pose: &HeadPoseSample,
        frame: &RankedFrame,
    ) -> Result<Vec<SegmenterEvent>, SegmentationError> {
        if pose.timestamp_ms != frame.timestamp_ms {
            return Err(SegmentationError::Misaligned { index: 0 });
        }
        let suppressed = match self.retained {
            None => false,
            Some((t, forward)) => {
                let prev = HeadPoseSample {
                    timestamp_ms: t,
                    origin: pose.origin,
                    forward,
                };
                let speed = angular_speed(&prev, pose).map_err(|_| SegmentationError::Unsorted {
                    index: 0,
                    prev_ms: self.last_ms.unwrap_or(t),
                    curr_ms: pose.timestamp_ms,
                })?;
                speed > self.params.saccade_speed_threshold_deg_per_s
            }
        };
        let candidates = if suppressed {
            Vec::new()
        } else {
            candidate_set(frame, &self.params)
        };
        let events = self.push_candidates(pose.timestamp_ms, candidates)?;
        if !suppressed {
            self.retained = Some((pose.timestamp_ms, pose.forward));
        }
        Ok(events)
    }

    /// Advances with a frame that already passed saccade suppression.
    pub fn push_frame(&mut self, frame: &RankedFrame) -> Result<Vec<SegmenterEvent>, SegmentationError> {
        let candidates = candidate_set(frame, &self.params);
        self.push_candidates(frame.timestamp_ms, candidates)
    }

    fn push_candidates(
        &mut self,
        t: f64,
        candidates: Vec<String>,
    ) -> Result<Vec<SegmenterEvent>, SegmentationError> {
        if let Some(prev) = self.last_ms {
            if !(t > prev) {
                return Err(SegmentationError::Unsorted {
                    index: 0,
                    prev_ms: prev,
                    curr_ms: t,
                });
            }
        }
        let mut events = Vec::new();
        let mut membership = candidates.clone();
        membership.sort_unstable();

        let continues = matches!(&self.run, Some(run) if run.membership == membership);
        if continues {
            if let Some(run) = self.run.as_mut() {
                run.last_ms = t;
            }
        } else {
            self.close_run(Some(t), &mut events);
            if !membership.is_empty() {
                self.run = Some(Run {
                    object_ids: candidates,
                    membership,
                    first_ms: t,
                    last_ms: t,
                    opened: false,
                });
            }
        }
        if let Some(prev) = self.last_ms {
            insert_sorted(&mut self.gaps, t - prev);
        }
        self.last_ms = Some(t);

        let period = median(&self.gaps);
        let min_fixation = self.params.min_fixation_ms;
        let window_end = self.window_end_ms;
        if let Some(run) = self.run.as_mut() {
            if !run.opened
                && run_duration(run.first_ms, run.last_ms, period, None, window_end) >= min_fixation
            {
                run.opened = true;
                events.push(SegmenterEvent::Opened {
                    object_ids: run.object_ids.clone(),
                    start_ms: run.first_ms,
                });
            }
        }
        Ok(events)
    }

    fn close_run(&mut self, next_ms: Option<f64>, events: &mut Vec<SegmenterEvent>) {
        let Some(run) = self.run.take() else {
            return;
        };
        let duration = run_duration(
            run.first_ms,
            run.last_ms,
            median(&self.gaps),
            next_ms,
            self.window_end_ms,
        );
        if duration < self.params.min_fixation_ms {
            return;
        }
        let segment = FixationSegment::new(run.object_ids, run.first_ms, duration);
        events.push(SegmenterEvent::Closed {
            segment: segment.clone(),
        });
        self.merge_in(segment);
    }

    fn merge_in(&mut self, segment: FixationSegment) {
        match self.pending.as_mut() {
            Some(prev)
                if prev.same_objects(&segment)
                    && segment.start_ms - prev.end_ms <= self.params.merge_window_ms =>
            {
                prev.duration_ms += segment.duration_ms;
                prev.end_ms = segment.end_ms;
            }
            _ => {
                if let Some(done) = self.pending.replace(segment) {
                    self.merged.push(done);
                }
            }
        }
    }

    /// Closes the open run and returns the merged history.
    pub fn finalize(mut self) -> (Vec<FixationSegment>, Vec<SegmenterEvent>) {
        let mut events = Vec::new();
        self.close_run(None, &mut events);
        if let Some(done) = self.pending.take() {
            self.merged.push(done);
        }
        (self.merged, events)
    }

    /// Merged segments so far, including the open run as if it ended now.
    pub fn snapshot(&self) -> Vec<FixationSegment> {
        self.clone().finalize().0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RankedEntry;
    use crate::segmentation::{merge_segments, segment_fixations};

    fn frame(t: f64, id: &str, angle: f64) -> RankedFrame {
        RankedFrame::from_unsorted(
            t,
            vec![RankedEntry {
                object_id: id.into(),
                angle_deg: angle,
            }],
        )
    }

    #[test]
    fn emits_open_then_close() {
        let params = SegmentationParams::default();
        let mut seg = StreamingSegmenter::new(params);
        let mut events = Vec::new();
        for i in 0..10 {
            events.extend(seg.push_frame(&frame(i as f64 * 33.0, "cup", 1.0)).unwrap());
        }
        events.extend(seg.push_frame(&frame(330.0, "cup", 30.0)).unwrap());
        assert!(matches!(&events[0], SegmenterEvent::Opened { object_ids, start_ms }
            if object_ids == &["cup"] && *start_ms == 0.0));
        assert!(matches!(&events[1], SegmenterEvent::Closed { segment } if segment.duration_ms == 330.0));
        assert_eq!(events.len(), 2);
        let (segments, tail) = seg.finalize();
        assert!(tail.is_empty());
        assert_eq!(segments.len(), 1);
    }

    #[test]
    fn matches_batch_on_fixed_trace() {
        let params = SegmentationParams::default();
        let mut frames = Vec::new();
        let mut t = 0.0;
        for (id, n) in [("a", 10), ("none", 2), ("a", 8), ("b", 3), ("b", 9)] {
            for _ in 0..n {
                let angle = if id == "none" { 50.0 } else { 2.0 };
                frames.push(frame(t, if id == "none" { "a" } else { id }, angle));
                t += 20.0;
            }
        }
        let batch = merge_segments(&segment_fixations(&frames, &params).unwrap(), &params).unwrap();
        let mut seg = StreamingSegmenter::new(params);
        for f in &frames {
            seg.push_frame(f).unwrap();
        }
        assert_eq!(seg.finalize().0, batch);
        assert_eq!(batch.len(), 2);
        assert_eq!(batch[0].duration_ms, 360.0);
    }

    #[test]
    fn rejects_stale_timestamps() {
        let mut seg = StreamingSegmenter::new(SegmentationParams::default());
        seg.push_frame(&frame(10.0, "a", 1.0)).unwrap();
        assert!(matches!(
            seg.push_frame(&frame(10.0, "a", 1.0)),
            Err(SegmentationError::Unsorted { .. })
        ));
    }
}
