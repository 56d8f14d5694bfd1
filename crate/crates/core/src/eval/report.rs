use std::fmt::Write;

use super::protocol::GazeDistribution;
use super::run::EvalReport;
use super::Category;

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.1}%", x * 100.0))
}

fn dist_row(d: Option<&GazeDistribution>) -> String {
    match d {
        None => "-".to_string(),
        Some(d) => Category::ALL
            .iter()
            .map(|c| format!("{:>6.1}", d.get(*c)))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Plain-text tables: accuracy per condition and task, gaze distributions
/// for correct and wrong turns, and the statistics.
pub fn render_report_tables(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Scenario: {}", report.scenario);
    let _ = writeln!(out);
    let _ = writeln!(out, "Accuracy");
    let _ = writeln!(
        out,
        "{:<20} {:>5} {:>8} {:>8} {:>8} {:>6}",
        "condition", "task", "correct", "scored", "accuracy", "clarif"
    );
    for r in &report.results {
        for t in &r.tasks {
            let _ = writeln!(
                out,
                "{:<20} {:>5} {:>8} {:>8} {:>8} {:>6}",
                r.condition_name,
                t.task.to_string(),
                t.correct,
                t.correct + t.wrong,
                pct(t.accuracy),
                t.clarifications
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Gaze distribution (% dwell: robot targets distractors irrelevant)");
    for r in &report.results {
        for t in &r.tasks {
            let _ = writeln!(
                out,
                "{:<20} {:>3} correct {}",
                r.condition_name,
                t.task.to_string(),
                dist_row(t.distribution_correct.as_ref())
            );
            let _ = writeln!(
                out,
                "{:<20} {:>3} wrong   {}",
                r.condition_name,
                t.task.to_string(),
                dist_row(t.distribution_wrong.as_ref())
            );
        }
    }
    if !report.comparisons.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Scene query vs speech+gaze (chi-square, 1 dof)");
        for c in &report.comparisons {
            match (&c.chi_square, &c.note) {
                (Some(x), _) => {
                    let _ = writeln!(
                        out,
                        "{}  table {:?}  chi2(1, n={}) = {:.2}, p = {:.3e}",
                        c.task, c.table, x.n, x.statistic, x.p_value
                    );
                }
                (None, note) => {
                    let _ = writeln!(out, "{}  table {:?}  undefined ({})", c.task, c.table, note.as_deref().unwrap_or(""));
                }
            }
        }
    }
    for r in &report.results {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{}: {} interactions, {} query_objects calls",
            r.condition_name, r.interactions, r.query_objects_calls
        );
        if let Some(q) = &r.query_effect {
            let _ = writeln!(
                out,
                "{} accuracy by scene query during the interaction: table {:?}, odds ratio {:.3}{}",
                q.task,
                q.table,
                q.odds_ratio.ratio,
                if q.odds_ratio.corrected { " (+0.5 corrected)" } else { "" }
            );
        }
    }
    out
}

/// CSV of mean gaze distributions:
/// `scenario,condition,task,subset,robot,targets,distractors,irrelevant`.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("scenario,condition,task,subset,robot,targets,distractors,irrelevant\n");
    for r in &report.results {
        for t in &r.tasks {
            for (subset, d) in [("correct", &t.distribution_correct), ("wrong", &t.distribution_wrong)] {
                if let Some(d) = d {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        report.scenario, r.condition_name, t.task, subset, d.robot, d.targets, d.distractors, d.irrelevant
                    );
                }
            }
        }
    }
    out
}
