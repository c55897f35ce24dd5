//! Tables for external plotting: the series against its trend-line fit,
//! and a value histogram.

use std::path::{Path, PathBuf};

use anyhow::Context;
use trendline::segmentation::fit_line;
use trendline::series::{TimeSeries, TrendSequence};

use crate::data::write_atomic;

pub const HISTOGRAM_BINS: usize = 20;

/// Least-squares line of each trend evaluated at its own points.
pub fn fitted_values(series: &TimeSeries, trends: &TrendSequence) -> anyhow::Result<Vec<f64>> {
    anyhow::ensure!(
        trends.covered() == series.len(),
        "trends cover {} points, series has {}",
        trends.covered(),
        series.len()
    );
    let values = series.values();
    let mut fitted = Vec::with_capacity(values.len());
    for k in 0..trends.len() {
        let points = &values[trends.range(k)];
        if points.len() < 2 {
            fitted.extend_from_slice(points);
            continue;
        }
        let (a, b) = fit_line(points)?;
        fitted.extend((0..points.len()).map(|j| a + b * j as f64));
    }
    Ok(fitted)
}

/// `(left edge, count)` over `bins` equal-width bins spanning the data.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, usize)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[b.min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + width * i as f64, c))
        .collect()
}

/// Write `series.csv` (index, raw, fitted) and `histogram.csv` (bin left
/// edge, count) into `dir`.
pub fn emit_plot_data(series: &TimeSeries, trends: &TrendSequence, dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let fitted = fitted_values(series, trends)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "raw", "fitted"])?;
    for (i, (raw, fit)) in series.values().iter().zip(&fitted).enumerate() {
        w.write_record([i.to_string(), raw.to_string(), fit.to_string()])?;
    }
    let series_path = dir.join("series.csv");
    write_atomic(&series_path, &w.into_inner()?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_left", "count"])?;
    for (edge, count) in histogram(series.values(), HISTOGRAM_BINS) {
        w.write_record([edge.to_string(), count.to_string()])?;
    }
    let hist_path = dir.join("histogram.csv");
    write_atomic(&hist_path, &w.into_inner()?)?;
    Ok((series_path, hist_path))
}
