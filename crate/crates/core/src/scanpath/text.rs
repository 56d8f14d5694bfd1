//! Canonical prompt block:
//!
//! ```text
//! Speech input: "Can you help me with this?"
//! Gaze history:
//! 1. [the_robot] 1.00s
//! 2. [cereal_box] 1.20s
//! 3. [bowl, small_bowl] 0.90s
//! ```
//!
//! The utterance is a JSON string literal. Durations are seconds with two
//! decimals, rounded half up. An empty history renders as
//! `Gaze history: (none)`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{SemanticScanpath, Utterance};
use crate::geometry::is_valid_object_id;
use crate::segmentation::{FixationSegment, GazeHistory, TimeWindow};

const SPEECH_PREFIX: &str = "Speech input: ";
const GAZE_HEADER: &str = "Gaze history:";
const GAZE_NONE: &str = "Gaze history: (none)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Duration in whole centiseconds, rounded half up.
pub(crate) fn centiseconds(duration_ms: f64) -> u64 {
    (duration_ms / 10.0 + 0.5).floor().max(0.0) as u64
}

pub fn render_prompt_text(sp: &SemanticScanpath) -> String {
    let mut out = String::new();
    out.push_str(SPEECH_PREFIX);
    out.push_str(&serde_json::to_string(&sp.utterance.text).expect("strings always serialize"));
    out.push('\n');
    if sp.gaze_history.segments.is_empty() {
        out.push_str(GAZE_NONE);
        return out;
    }
    out.push_str(GAZE_HEADER);
    for (i, seg) in sp.gaze_history.segments.iter().enumerate() {
        let cs = centiseconds(seg.duration_ms);
        let _ = write!(
            out,
            "\n{}. [{}] {}.{:02}s",
            i + 1,
            seg.object_ids.join(", "),
            cs / 100,
            cs % 100
        );
    }
    out
}

fn parse_segment_line(line_no: usize, line: &str, expected_index: usize) -> Result<(Vec<String>, f64), ParseError> {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return Err(err(line_no, 1, "expected segment number"));
    }
    let index: usize = line[..digits]
        .parse()
        .map_err(|_| err(line_no, 1, "segment number out of range"))?;
    if index != expected_index {
        return Err(err(
            line_no,
            1,
            format!("expected segment number {expected_index}, found {index}"),
        ));
    }
    let rest = &line[digits..];
    let mut col = digits + 1;
    let rest = rest
        .strip_prefix(". [")
        .ok_or_else(|| err(line_no, col, "expected \". [\""))?;
    col += 3;
    let close = rest
        .find(']')
        .ok_or_else(|| err(line_no, col, "unterminated object list"))?;
    let mut ids = Vec::new();
    let mut id_col = col;
    for id in rest[..close].split(", ") {
        if !is_valid_object_id(id) {
            return Err(err(line_no, id_col, format!("invalid object id {id:?}")));
        }
        if ids.iter().any(|x: &String| x == id) {
            return Err(err(line_no, id_col, format!("duplicate object id {id:?}")));
        }
        ids.push(id.to_string());
        id_col += id.len() + 2;
    }
    col += close + 1;
    let rest = rest[close + 1..]
        .strip_prefix(' ')
        .ok_or_else(|| err(line_no, col, "expected space before duration"))?;
    col += 1;
    let body = rest
        .strip_suffix('s')
        .ok_or_else(|| err(line_no, col + rest.len(), "expected duration suffix 's'"))?;
    let (whole, frac) = body
        .split_once('.')
        .ok_or_else(|| err(line_no, col, "expected duration of the form S.CC"))?;
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(line_no, col, "invalid whole seconds"));
    }
    if frac.len() != 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(line_no, col + whole.len() + 1, "expected two decimal places"));
    }
    let whole: u64 = whole
        .parse()
        .map_err(|_| err(line_no, col, "duration out of range"))?;
    let frac: u64 = frac.parse().expect("two digits");
    Ok((ids, (whole * 100 + frac) as f64 * 10.0))
}

/// Parses a block produced by [`render_prompt_text`]. Segment start times
/// are not part of the text; segments are laid end to end from zero.
pub fn parse_prompt_text(text: &str) -> Result<SemanticScanpath, ParseError> {
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let first = lines.first().ok_or_else(|| err(1, 1, "empty input"))?;
    let literal = first
        .strip_prefix(SPEECH_PREFIX)
        .ok_or_else(|| err(1, 1, format!("expected {SPEECH_PREFIX:?}")))?;
    let utterance_text: String = serde_json::from_str(literal)
        .map_err(|e| err(1, SPEECH_PREFIX.len() + e.column().max(1), format!("invalid utterance string: {e}")))?;

    let header = lines.get(1).ok_or_else(|| err(2, 1, "missing gaze history"))?;
    let mut segments = Vec::new();
    if *header == GAZE_NONE {
        if lines.len() > 2 {
            return Err(err(3, 1, "unexpected content after empty gaze history"));
        }
    } else if *header == GAZE_HEADER {
        if lines.len() == 2 {
            return Err(err(2, GAZE_HEADER.len() + 1, "gaze history has no segments"));
        }
        let mut start = 0.0;
        for (i, line) in lines[2..].iter().enumerate() {
            let (ids, duration) = parse_segment_line(i + 3, line, i + 1)?;
            segments.push(FixationSegment::new(ids, start, duration));
            start += duration;
        }
    } else {
        return Err(err(2, 1, format!("expected {GAZE_HEADER:?}")));
    }

    let end = segments.last().map_or(0.0, |s| s.end_ms);
    let window = TimeWindow::new(0.0, end);
    Ok(SemanticScanpath {
        utterance: Utterance::new(utterance_text, window),
        gaze_history: GazeHistory {
            window_start_ms: 0.0,
            window_end_ms: end,
            segments,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scanpath(text: &str, segs: &[(&[&str], f64)]) -> SemanticScanpath {
        let mut start = 0.0;
        let segments = segs
            .iter()
            .map(|(ids, d)| {
                let s = FixationSegment::new(ids.iter().map(|s| s.to_string()).collect(), start, *d);
                start += d + 50.0;
                s
            })
            .collect();
        let w = TimeWindow::new(0.0, start);
        SemanticScanpath {
            utterance: Utterance::new(text, w),
            gaze_history: GazeHistory {
                window_start_ms: 0.0,
                window_end_ms: start,
                segments,
            },
        }
    }

    #[test]
    fn empty_history_renders_none() {
        let sp = scanpath("Hi there", &[]);
        assert_eq!(render_prompt_text(&sp), "Speech input: \"Hi there\"\nGaze history: (none)");
        let parsed = parse_prompt_text(&render_prompt_text(&sp)).unwrap();
        assert!(parsed.gaze_history.segments.is_empty());
    }

    #[test]
    fn single_robot_segment_line() {
        let sp = scanpath("x", &[(&["the_robot"], 800.0)]);
        assert!(render_prompt_text(&sp).ends_with("\n1. [the_robot] 0.80s"));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(centiseconds(1004.999), 100);
        assert_eq!(centiseconds(1005.0), 101);
        assert_eq!(centiseconds(0.0), 0);
        let sp = scanpath("x", &[(&["a", "b"], 1235.0)]);
        assert!(render_prompt_text(&sp).ends_with("1. [a, b] 1.24s"));
    }

    #[test]
    fn figure_one_block_round_trips() {
        let sp = scanpath(
            "Can you help me with this?",
            &[(&["the_robot"], 1000.0), (&["cereal_box"], 1200.0), (&["bowl"], 900.0)],
        );
        let text = render_prompt_text(&sp);
        assert_eq!(
            text,
            "Speech input: \"Can you help me with this?\"\nGaze history:\n\
             1. [the_robot] 1.00s\n2. [cereal_box] 1.20s\n3. [bowl] 0.90s"
        );
        let parsed = parse_prompt_text(&text).unwrap();
        assert_eq!(parsed, sp.normalized());
    }

    #[test]
    fn quotes_and_newlines_in_utterance_survive() {
        let sp = scanpath("She said \"this\"\nthen left", &[(&["a"], 100.0)]);
        let parsed = parse_prompt_text(&render_prompt_text(&sp)).unwrap();
        assert_eq!(parsed.utterance.text, sp.utterance.text);
    }

    #[test]
    fn malformed_blocks_report_positions() {
        let e = parse_prompt_text("Speech: \"x\"").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse_prompt_text("Speech input: \"x\"\nGaze history:\n1. [cereal_box] 1.2").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_prompt_text("Speech input: \"x\"\nGaze history:\n1. [cereal_box").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_prompt_text("Speech input: \"x\"\nGaze history:\n2. [a] 1.00s").unwrap_err();
        assert!(e.message.contains("expected segment number 1"));
        let e = parse_prompt_text("Speech input: \"x\"\nGaze history:\n1. [a b] 1.00s").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(parse_prompt_text("Speech input: \"unterminated").is_err());
        assert!(parse_prompt_text("").is_err());
        assert!(parse_prompt_text("Speech input: \"x\"\nGaze history:").is_err());
    }

    #[test]
    fn trailing_newline_is_tolerated() {
        let sp = scanpath("x", &[(&["a"], 120.0)]);
        let text = render_prompt_text(&sp) + "\n";
        assert_eq!(parse_prompt_text(&text).unwrap(), sp.normalized());
    }
}
