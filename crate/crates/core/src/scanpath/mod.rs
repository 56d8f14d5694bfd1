//! Semantic scanpaths: a spoken utterance paired with the gaze history
//! recorded over the same turn window, plus the canonical text block that
//! carries it inside LLM user messages.

mod text;
mod timeline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{HeadPoseSample, SceneRanker};
use crate::segmentation::{
    build_gaze_history_with, FixationSegment, GazeHistory, SegmentationParams, TimeWindow,
};

pub use text::{parse_prompt_text, render_prompt_text, ParseError};
pub use timeline::render_timeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub token: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<Word>>,
    pub turn_window: TimeWindow,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanpathError {
    #[error("utterance window [{u_start}, {u_end}] and gaze window [{g_start}, {g_end}] are disjoint")]
    DisjointWindows {
        u_start: f64,
        u_end: f64,
        g_start: f64,
        g_end: f64,
    },
    #[error("word {index} ({token:?}) is out of order or outside the turn window")]
    WordOutOfWindow { index: usize, token: String },
    #[error("words {words:?} do not spell the utterance text {text:?}")]
    WordsMismatch { words: String, text: String },
}

fn squash_whitespace(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

impl Utterance {
    pub fn new(text: impl Into<String>, turn_window: TimeWindow) -> Self {
        Self {
            text: text.into(),
            words: None,
            turn_window,
        }
    }

    pub fn with_words(mut self, words: Vec<Word>) -> Self {
        self.words = Some(words);
        self
    }

    /// Start of speech: the first word if timestamps exist.
    pub fn speech_start_ms(&self) -> Option<f64> {
        self.words.as_ref()?.first().map(|w| w.start_ms)
    }

    pub fn validate(&self) -> Result<(), ScanpathError> {
        let Some(words) = &self.words else {
            return Ok(());
        };
        let mut prev_end = self.turn_window.start_ms;
        for (index, w) in words.iter().enumerate() {
            if w.start_ms < prev_end || w.end_ms < w.start_ms || w.end_ms > self.turn_window.end_ms {
                return Err(ScanpathError::WordOutOfWindow {
                    index,
                    token: w.token.clone(),
                });
            }
            prev_end = w.end_ms;
        }
        let joined: String = words.iter().map(|w| w.token.as_str()).collect();
        if squash_whitespace(&joined) != squash_whitespace(&self.text) {
            return Err(ScanpathError::WordsMismatch {
                words: joined,
                text: self.text.clone(),
            });
        }
        Ok(())
    }
}

/// Utterance plus the concurrent gaze history. The pairing is loose: the
/// whole utterance is associated with the whole history, with no per-word
/// alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScanpath {
    pub utterance: Utterance,
    pub gaze_history: GazeHistory,
}

impl SemanticScanpath {
    /// The form that survives a render/parse round trip: durations rounded
    /// to centiseconds, segments laid end to end from zero, word timestamps
    /// dropped and the window spanning the total dwell.
    pub fn normalized(&self) -> SemanticScanpath {
        let mut start = 0.0;
        let segments: Vec<FixationSegment> = self
            .gaze_history
            .segments
            .iter()
            .map(|s| {
                let duration = text::centiseconds(s.duration_ms) as f64 * 10.0;
                let seg = FixationSegment::new(s.object_ids.clone(), start, duration);
                start += duration;
                seg
            })
            .collect();
        let window = TimeWindow::new(0.0, start);
        SemanticScanpath {
            utterance: Utterance::new(self.utterance.text.clone(), window),
            gaze_history: GazeHistory {
                window_start_ms: window.start_ms,
                window_end_ms: window.end_ms,
                segments,
            },
        }
    }
}

/// Pairs an utterance with a gaze history. A history computed over a
/// different but overlapping window is re-windowed to the utterance turn:
/// segments starting outside the turn are dropped and durations are capped
/// at the turn end.
pub fn compose(utterance: Utterance, history: GazeHistory) -> Result<SemanticScanpath, ScanpathError> {
    let turn = utterance.turn_window;
    let gaze = history.window();
    if gaze == turn {
        return Ok(SemanticScanpath {
            utterance,
            gaze_history: history,
        });
    }
    if !turn.intersects(&gaze) {
        return Err(ScanpathError::DisjointWindows {
            u_start: turn.start_ms,
            u_end: turn.end_ms,
            g_start: gaze.start_ms,
            g_end: gaze.end_ms,
        });
    }
    let segments = history
        .segments
        .into_iter()
        .filter(|s| turn.contains(s.start_ms))
        .map(|mut s| {
            if s.end_ms > turn.end_ms {
                let cut = s.end_ms - turn.end_ms;
                s.duration_ms = (s.duration_ms - cut).max(0.0);
                s.end_ms = turn.end_ms;
            }
            s
        })
        .collect();
    Ok(SemanticScanpath {
        utterance,
        gaze_history: GazeHistory {
            window_start_ms: turn.start_ms,
            window_end_ms: turn.end_ms,
            segments,
        },
    })
}

/// The full offline path: gaze history over the utterance's turn window,
/// paired with the utterance. `poses` may extend beyond the window.
pub fn scanpath_from_poses(
    ranker: &SceneRanker,
    poses: &[HeadPoseSample],
    utterance: Utterance,
    params: &SegmentationParams,
) -> crate::Result<SemanticScanpath> {
    params.validate()?;
    utterance.validate()?;
    let window = utterance.turn_window;
    let in_window: Vec<HeadPoseSample> = poses.iter().filter(|p| window.contains(p.timestamp_ms)).copied().collect();
    let history = if in_window.is_empty() {
        GazeHistory::empty(window)
    } else {
        build_gaze_history_with(ranker, &in_window, window, params)?
    };
    Ok(compose(utterance, history)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(id: &str, start: f64, dur: f64) -> FixationSegment {
        FixationSegment::new(vec![id.to_string()], start, dur)
    }

    #[test]
    fn compose_with_empty_history() {
        let w = TimeWindow::new(0.0, 2000.0);
        let sp = compose(Utterance::new("hello", w), GazeHistory::empty(w)).unwrap();
        assert!(sp.gaze_history.segments.is_empty());
        assert_eq!(sp.gaze_history.window(), sp.utterance.turn_window);
    }

    #[test]
    fn compose_rewindows_overlapping_history() {
        let turn = TimeWindow::new(1000.0, 3000.0);
        let history = GazeHistory {
            window_start_ms: 0.0,
            window_end_ms: 4000.0,
            segments: vec![seg("a", 200.0, 500.0), seg("b", 1200.0, 400.0), seg("c", 2800.0, 600.0)],
        };
        let sp = compose(Utterance::new("x", turn), history).unwrap();
        let ids: Vec<_> = sp.gaze_history.segments.iter().map(|s| s.object_ids[0].as_str()).collect();
        assert_eq!(ids, ["b", "c"]);
        assert_eq!(sp.gaze_history.segments[1].duration_ms, 200.0);
        assert_eq!(sp.gaze_history.window(), turn);
    }

    #[test]
    fn compose_rejects_disjoint_windows() {
        let err = compose(
            Utterance::new("x", TimeWindow::new(0.0, 10.0)),
            GazeHistory::empty(TimeWindow::new(20.0, 30.0)),
        )
        .unwrap_err();
        assert!(matches!(err, ScanpathError::DisjointWindows { .. }));
    }

    #[test]
    fn word_validation() {
        let w = TimeWindow::new(0.0, 1000.0);
        let words = vec![
            Word { token: "pass".into(), start_ms: 100.0, end_ms: 300.0 },
            Word { token: "that".into(), start_ms: 300.0, end_ms: 500.0 },
        ];
        let u = Utterance::new("pass that", w).with_words(words.clone());
        assert!(u.validate().is_ok());
        assert_eq!(u.speech_start_ms(), Some(100.0));
        let u = Utterance::new("pass this", w).with_words(words.clone());
        assert!(matches!(u.validate(), Err(ScanpathError::WordsMismatch { .. })));
        let mut late = words;
        late[1].end_ms = 1200.0;
        let u = Utterance::new("pass that", w).with_words(late);
        assert!(matches!(u.validate(), Err(ScanpathError::WordOutOfWindow { index: 1, .. })));
    }
}
