//! Human-readable report tables in a Slope / Duration / Average layout.

use std::fmt::Write;

use trendline::evaluation::Metrics;

use crate::experiment::{Improvement, ReportFile};

fn mean_std(mean: &Metrics, std: &Metrics) -> [String; 3] {
    [
        format!("{:.4} ± {:.4}", mean.slope, std.slope),
        format!("{:.4} ± {:.4}", mean.duration, std.duration),
        format!("{:.4} ± {:.4}", mean.average, std.average),
    ]
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |p| format!("{p:.2}"))
}

fn improvement_cells(i: &Improvement) -> [String; 3] {
    [percent(i.slope), percent(i.duration), percent(i.average)]
}

fn row(out: &mut String, label: &str, cells: &[String; 3]) {
    let _ = writeln!(out, "{label:<12}{:>22}{:>22}{:>22}", cells[0], cells[1], cells[2]);
}

fn header(out: &mut String) {
    row(out, "", &["Slope".into(), "Duration".into(), "Average".into()]);
}

pub fn human(r: &ReportFile) -> String {
    let mut out = String::new();
    let d = &r.dataset;
    let _ = writeln!(
        out,
        "dataset: {} points ({} missing), {} trends, window {}, {} instances",
        d.n_points, d.n_missing, d.n_trends, d.window, d.n_instances
    );
    let seeds = &r.model.report.runs;
    let _ = writeln!(
        out,
        "runs: {} (seeds {}..={})\n",
        seeds.len(),
        seeds.first().map_or(0, |s| s.seed),
        seeds.last().map_or(0, |s| s.seed)
    );
    header(&mut out);
    let b = &r.baseline.report;
    row(&mut out, "LVM", &mean_std(&b.mean, &b.std));
    let m = &r.model.report;
    row(&mut out, &r.model.kind.name().to_uppercase(), &mean_std(&m.mean, &m.std));
    row(&mut out, "% improv.", &improvement_cells(&r.improvement));

    let a = &r.accounting;
    if a.cold_epochs_per_run > 0 {
        let _ = writeln!(
            out,
            "\nepochs per run: {} (cold budget {}, planned {:.1}, speed-up {:.4})",
            a.epochs_per_run.first().copied().unwrap_or(0),
            a.cold_epochs_per_run,
            a.schedule.total_epochs,
            a.schedule.speedup
        );
    }
    let _ = writeln!(
        out,
        "wall clock: model {:.2} s, baseline {:.2} s",
        r.timing.model_secs, r.timing.baseline_secs
    );
    out
}

/// Per-metric improvement of `second`'s model over `first`'s.
pub fn compare(first: &ReportFile, second: &ReportFile) -> Improvement {
    Improvement::between(&second.model.report.mean, &first.model.report.mean)
}

pub fn human_comparison(first: &ReportFile, second: &ReportFile) -> String {
    let mut out = String::new();
    header(&mut out);
    for r in [first, second] {
        let m = &r.model.report;
        row(&mut out, &r.model.kind.name().to_uppercase(), &mean_std(&m.mean, &m.std));
    }
    row(&mut out, "% improv.", &improvement_cells(&compare(first, second)));
    out
}
