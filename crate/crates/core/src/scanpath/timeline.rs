use std::fmt::Write as _;

use super::SemanticScanpath;

const WIDTH: usize = 60;

fn column(t: f64, start: f64, span: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    (((t - start) / span) * WIDTH as f64).round().clamp(0.0, WIDTH as f64) as usize
}

/// Plain-text rendering of a turn: one lane per AOI with a bar for every
/// fixation segment, followed by the utterance and its word timings.
/// Lanes appear in order of first fixation. Segments over several objects
/// are drawn with `=` on each of their lanes.
pub fn render_timeline(sp: &SemanticScanpath) -> String {
    let history = &sp.gaze_history;
    let start = history.window_start_ms;
    let span = history.window_end_ms - history.window_start_ms;

    let mut lanes: Vec<&str> = Vec::new();
    for seg in &history.segments {
        for id in &seg.object_ids {
            if !lanes.contains(&id.as_str()) {
                lanes.push(id);
            }
        }
    }
    let label_width = lanes.iter().map(|l| l.len()).max().unwrap_or(0).max(6);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "Gaze history [{:.2}s .. {:.2}s]",
        start / 1000.0,
        history.window_end_ms / 1000.0
    );
    if lanes.is_empty() {
        let _ = writeln!(out, "{:label_width$} |{}|", "(none)", " ".repeat(WIDTH));
    }
    for lane in &lanes {
        let mut row = vec![' '; WIDTH];
        let mut dwell = 0.0;
        for seg in history.segments.iter().filter(|s| s.object_ids.iter().any(|o| o == lane)) {
            let (a, b) = (column(seg.start_ms, start, span), column(seg.end_ms, start, span));
            let mark = if seg.object_ids.len() > 1 { '=' } else { '#' };
            for cell in row.iter_mut().take(b.max(a + 1).min(WIDTH)).skip(a.min(WIDTH - 1)) {
                *cell = mark;
            }
            dwell += seg.duration_ms;
        }
        let _ = writeln!(
            out,
            "{:label_width$} |{}| {:.2}s",
            lane,
            row.into_iter().collect::<String>(),
            dwell / 1000.0
        );
    }
    let _ = writeln!(out, "Speech: {:?}", sp.utterance.text);
    if let Some(words) = &sp.utterance.words {
        for w in words {
            let _ = writeln!(
                out,
                "  {:>7.2}s-{:<7.2}s {}",
                w.start_ms / 1000.0,
                w.end_ms / 1000.0,
                w.token
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanpath::Utterance;
    use crate::segmentation::{FixationSegment, GazeHistory, TimeWindow};

    #[test]
    fn lanes_follow_first_fixation_order() {
        let w = TimeWindow::new(0.0, 3000.0);
        let sp = SemanticScanpath {
            utterance: Utterance::new("Can you help me with this?", w),
            gaze_history: GazeHistory {
                window_start_ms: 0.0,
                window_end_ms: 3000.0,
                segments: vec![
                    FixationSegment::new(vec!["the_robot".into()], 0.0, 1000.0),
                    FixationSegment::new(vec!["cereal_box".into()], 1000.0, 1000.0),
                    FixationSegment::new(vec!["bowl".into(), "cereal_box".into()], 2000.0, 1000.0),
                ],
            },
        };
        let text = render_timeline(&sp);
        let lanes: Vec<&str> = text.lines().skip(1).take(3).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(lanes, ["the_robot", "cereal_box", "bowl"]);
        assert!(text.contains("2.00s"));
        assert!(text.lines().nth(3).unwrap().contains('='));
    }

    #[test]
    fn empty_history_has_placeholder_lane() {
        let w = TimeWindow::new(0.0, 1000.0);
        let sp = SemanticScanpath {
            utterance: Utterance::new("hi", w),
            gaze_history: GazeHistory::empty(w),
        };
        assert!(render_timeline(&sp).contains("(none)"));
    }
}
