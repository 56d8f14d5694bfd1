mod common;

use std::sync::Arc;

use gazeground_core::agent::{AgentConfig, HeuristicBackend};
use gazeground_core::eval::{
    builtin_scenarios, chi_square_2x2, chi_square_sf_1dof, combinatorial_interactions, odds_ratio,
    render_report_tables, report_csv, run_evaluation, synthesize_grid, EvalCondition, EvalOptions, EvalReport,
    SynthOptions, TaskId,
};
use gazeground_core::geometry::{HeadPoseSample, Vec3};
use gazeground_core::io::{
    history_to_string, load_trace, load_turn_records, parse_history_str, parse_scene_str, parse_transcript_str,
    save_trace, save_turn_records, transcript_to_string, IoError, SceneFile, TraceFile, TraceHeader,
};
use gazeground_core::scanpath::{Utterance, Word};
use gazeground_core::segmentation::{FixationSegment, GazeHistory, SegmentationParams, TimeWindow};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn clean_grid() -> gazeground_core::eval::RecordGrid {
    let (b, d) = builtin_scenarios();
    synthesize_grid(&[&b, &d], 7, 11, &SynthOptions::default(), &SegmentationParams::default()).unwrap()
}

// ----------------------------------------------------------------- io

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_round_trip(
        samples in prop::collection::vec(
            ((-2.0..2.0f64, -2.0..2.0f64, 0.0..2.0f64), (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 0.5..50.0f64),
            0..40,
        ),
    ) {
        let mut t = 0.0;
        let poses: Vec<HeadPoseSample> = samples
            .into_iter()
            .filter_map(|((x, y, z), (fx, fy, fz), dt)| {
                t += dt;
                let f = Vec3::new(fx, fy, fz).normalized()?;
                (Vec3::new(fx, fy, fz).norm() > 0.1).then(|| HeadPoseSample::new(t, Vec3::new(x, y, z), f).unwrap())
            })
            .collect();
        let trace = TraceFile::new(TraceHeader::default(), poses);
        let (back, warnings) = TraceFile::from_jsonl(&trace.to_jsonl(), "mem").unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn history_round_trip(n in 0..8usize, dur in 100.0..900.0f64) {
        let segs: Vec<FixationSegment> = (0..n)
            .map(|i| FixationSegment::new(vec!["bowl".into()], i as f64 * 1000.0, dur))
            .collect();
        let h = GazeHistory { window_start_ms: 0.0, window_end_ms: 9000.0, segments: segs };
        prop_assert_eq!(parse_history_str(&history_to_string(&h), "mem").unwrap(), h);
    }
}

#[test]
fn trace_file_round_trip_on_disk() {
    let (b, _) = builtin_scenarios();
    let f = gazeground_core::eval::demo_fixture(&b, TaskId::T1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    save_trace(&path, &f.trace).unwrap();
    let (back, warnings) = load_trace(&path).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(back, f.trace);
}

#[test]
fn trace_orientation_forms_and_warnings() {
    let text = [
        r#"{"type":"header","format_version":1}"#,
        r#"{"t":0,"origin":[0,0,1],"forward":[1,0,0]}"#,
        r#"{"t":10,"origin":[0,0,1],"quat":[1,0,0,0]}"#,
        r#"{"t":20,"origin":[0,0,1],"euler_deg":[90,0,0]}"#,
        r#"{"t":30,"origin":[0,0,1],"forward":[2,0,0]}"#,
    ]
    .join("\n");
    let (trace, warnings) = TraceFile::from_jsonl(&text, "mem").unwrap();
    assert_eq!(trace.samples.len(), 4);
    assert!((trace.samples[1].forward - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    assert!((trace.samples[2].forward - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    assert_eq!(trace.samples[3].forward, Vec3::new(1.0, 0.0, 0.0));
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].code, "forward_renormalized");
    assert_eq!(warnings[0].line, Some(5));
}

#[test]
fn trace_errors_carry_locations() {
    let bad_version = r#"{"type":"header","format_version":7}"#;
    assert!(matches!(
        TraceFile::from_jsonl(bad_version, "f"),
        Err(IoError::UnsupportedVersion { found: 7, .. })
    ));
    let backwards = [
        r#"{"type":"header","format_version":1}"#,
        r#"{"t":10,"origin":[0,0,1],"forward":[1,0,0]}"#,
        r#"{"t":5,"origin":[0,0,1],"forward":[1,0,0]}"#,
    ]
    .join("\n");
    match TraceFile::from_jsonl(&backwards, "f") {
        Err(IoError::NonMonotonic { location, .. }) => assert_eq!(location, "f:3"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scene_and_transcript_round_trip() {
    let (b, _) = builtin_scenarios();
    let text = serde_json::to_string(&SceneFile::from_scene(&b.scene, Some(b.viewer))).unwrap();
    let (scene, viewer) = parse_scene_str(&text, "mem").unwrap();
    assert_eq!(scene, b.scene);
    assert_eq!(viewer, Some(b.viewer));

    let u = Utterance::new("Can you help me?", TimeWindow::new(0.0, 2000.0)).with_words(vec![
        Word { token: "Can".into(), start_ms: 100.0, end_ms: 300.0 },
        Word { token: "you".into(), start_ms: 350.0, end_ms: 500.0 },
        Word { token: "help".into(), start_ms: 550.0, end_ms: 800.0 },
        Word { token: "me?".into(), start_ms: 850.0, end_ms: 1000.0 },
    ]);
    assert_eq!(parse_transcript_str(&transcript_to_string(&u), "mem").unwrap(), u);
    let mut bad = u.clone();
    bad.words.as_mut().unwrap()[0].token = "Could".into();
    assert!(parse_transcript_str(&transcript_to_string(&bad), "mem").is_err());
}

#[test]
fn record_grid_round_trips_through_a_directory() {
    let grid = clean_grid();
    assert_eq!(grid.len(), 42);
    let dir = tempfile::tempdir().unwrap();
    let files = save_turn_records(dir.path(), &grid).unwrap();
    assert_eq!(files.len(), 14);
    let back = load_turn_records(dir.path()).unwrap();
    assert_eq!(back, grid);
}

// --------------------------------------------------------------- eval

#[test]
fn seven_users_give_343_interactions_with_49_appearances() {
    let grid = clean_grid();
    for scenario in ["breakfast", "drink"] {
        let interactions = combinatorial_interactions(&grid, scenario).unwrap();
        assert_eq!(interactions.len(), 343);
        for r in grid.records().filter(|r| r.scenario == scenario) {
            let n = interactions
                .iter()
                .filter(|i| std::ptr::eq(i.records[r.task.index()], r))
                .count();
            assert_eq!(n, 49, "{} {} {}", r.user_id, r.scenario, r.task);
        }
        // Odometer order: the last task varies fastest.
        assert_eq!(interactions[0].users(), ["u1", "u1", "u1"]);
        assert_eq!(interactions[1].users(), ["u1", "u1", "u2"]);
        assert_eq!(interactions[7].users(), ["u1", "u2", "u1"]);
    }
}

#[test]
fn heuristic_is_perfect_on_clean_records_and_ablation_never_queries() {
    let grid = clean_grid();
    let (breakfast, _) = builtin_scenarios();
    let backend = Arc::new(HeuristicBackend::default());
    let full = run_evaluation(
        &grid,
        &breakfast,
        &EvalOptions { parallelism: 4, ..EvalOptions::default() },
        backend.clone(),
    )
    .unwrap();
    let ablated = run_evaluation(
        &grid,
        &breakfast,
        &EvalOptions {
            condition: EvalCondition::SPEECH_GAZE,
            parallelism: 2,
            agent: AgentConfig::default(),
            ..EvalOptions::default()
        },
        backend,
    )
    .unwrap();
    for r in [&full, &ablated] {
        assert_eq!(r.interactions, 343);
        for t in &r.tasks {
            assert_eq!(t.turns, 343);
            assert_eq!(t.accuracy, Some(1.0), "{} {}", r.condition_name, t.task);
        }
    }
    assert!(full.query_objects_calls > 0);
    assert_eq!(ablated.query_objects_calls, 0);

    let report = EvalReport::new("breakfast", vec![full, ablated]);
    assert!(report.comparisons.iter().all(|c| c.chi_square.is_none()));
    let tables = render_report_tables(&report);
    assert!(tables.contains("speech+gaze+scene"));
    let csv = report_csv(&report);
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn parallelism_does_not_change_results() {
    let grid = clean_grid();
    let (_, drink) = builtin_scenarios();
    let run = |p| {
        serde_json::to_string(
            &run_evaluation(
                &grid,
                &drink,
                &EvalOptions { parallelism: p, ..EvalOptions::default() },
                Arc::new(HeuristicBackend::default()),
            )
            .unwrap(),
        )
        .unwrap()
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn chi_square_matches_statrs() {
    for (a, b, c, d) in [(20.0, 5.0, 7.0, 30.0), (150.0, 193.0, 12.0, 331.0), (1.0, 2.0, 3.0, 4.0)] {
        let x = chi_square_2x2(a, b, c, d).unwrap();
        let n: f64 = a + b + c + d;
        // Sum of (O - E)^2 / E over the four cells.
        let rows = [a + b, c + d];
        let cols = [a + c, b + d];
        let obs = [[a, b], [c, d]];
        let mut stat = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = rows[i] * cols[j] / n;
                stat += (obs[i][j] - e) * (obs[i][j] - e) / e;
            }
        }
        assert!((x.statistic - stat).abs() < 1e-9 * stat.max(1.0));
        let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(stat);
        assert!((x.p_value - p).abs() < 1e-9, "{} vs {}", x.p_value, p);
    }
    assert!(chi_square_sf_1dof(151.03) < 0.001);
    assert!(chi_square_sf_1dof(131.76) < 0.001);
    assert!((chi_square_sf_1dof(3.841458820694124) - 0.05).abs() < 1e-9);
}

#[test]
fn odds_ratio_matches_formula() {
    let r = odds_ratio(2.0, 1.0, 1.0, 2.0).unwrap();
    assert_eq!(r.ratio, 4.0);
    assert!(!r.corrected);
    let z = odds_ratio(0.0, 3.0, 2.0, 5.0).unwrap();
    assert!(z.corrected);
    assert!((z.ratio - (0.5 * 5.5) / (3.5 * 2.5)).abs() < 1e-12);
}
