//! End-to-end experiment: ingest, segment, evaluate the chosen model and
//! the last-value baseline, and assemble a report.

use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use trendline::evaluation::{
    make_partitions, multi_run, percent_improvement, warm_start_schedule, Metrics, RunReport, WarmStartSchedule,
};
use trendline::models::{ModelKind, ModelSpec};
use trendline::segmentation::{build_instances, segment_bottom_up};
use trendline::series::{impute_missing, TimeSeries};

use crate::config::ExperimentConfig;
use crate::data::load_csv;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_points: usize,
    pub n_missing: usize,
    pub n_trends: usize,
    pub window: usize,
    pub n_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRuns {
    pub kind: ModelKind,
    pub report: RunReport,
}

/// Percent improvement per metric; `None` where the baseline RMSE is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub slope: Option<f64>,
    pub duration: Option<f64>,
    pub average: Option<f64>,
}

impl Improvement {
    pub fn between(model: &Metrics, baseline: &Metrics) -> Self {
        Self {
            slope: percent_improvement(model.slope, baseline.slope).ok(),
            duration: percent_improvement(model.duration, baseline.duration).ok(),
            average: percent_improvement(model.average, baseline.average).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub schedule: WarmStartSchedule,
    /// Epochs a cold fit on every split would take, per run.
    pub cold_epochs_per_run: usize,
    pub epochs_per_run: Vec<usize>,
}

/// Wall-clock seconds; the only part of a report that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub model_secs: f64,
    pub baseline_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    /// The experiment with presets expanded; running it again reproduces
    /// every number below except `timing`.
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub model: ModelRuns,
    pub baseline: ModelRuns,
    pub improvement: Improvement,
    pub accounting: Accounting,
    pub timing: Timing,
}

impl ReportFile {
    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.version != REPORT_VERSION {
            anyhow::bail!("unsupported report version {}", r.version);
        }
        Ok(r)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The report with timing zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing {
                model_secs: 0.0,
                baseline_secs: 0.0,
                total_secs: 0.0,
            },
            ..self.clone()
        }
    }
}

/// Load the configured dataset and run the experiment on it.
pub fn run(config: &ExperimentConfig) -> anyhow::Result<ReportFile> {
    let series = load_csv(&config.dataset).context("load")?;
    run_on_series(config, &series)
}

pub fn run_on_series(config: &ExperimentConfig, series: &TimeSeries) -> anyhow::Result<ReportFile> {
    let start = Instant::now();
    let config = config.resolved().context("config")?;
    let spec = config.model_spec().context("config")?;
    let sizes = config.partition_sizes().context("config")?;

    let filled = impute_missing(series).context("impute")?;
    let trends = segment_bottom_up(&filled, &config.segmentation).context("segment")?;
    let instances = build_instances(&filled, &trends, config.features.mode, config.features.history)
        .context("instances")?;
    let plan = make_partitions(instances.len(), sizes.splits, sizes.test, sizes.val, sizes.train)
        .context("partition")?;

    let t0 = Instant::now();
    let report = multi_run(&spec, &instances, &plan, config.runs.n_runs, config.runs.seed_base).context("train")?;
    let model_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let baseline = multi_run(&ModelSpec::lvm(), &instances, &plan, config.runs.n_runs, config.runs.seed_base)
        .context("baseline")?;
    let baseline_secs = t1.elapsed().as_secs_f64();

    let epochs = if spec.kind().is_neural() { spec.train.epochs } else { 0 };
    Ok(ReportFile {
        version: REPORT_VERSION,
        dataset: DatasetSummary {
            n_points: series.len(),
            n_missing: series.missing_count(),
            n_trends: trends.len(),
            window: trends.trends()[0].duration,
            n_instances: instances.len(),
        },
        improvement: Improvement::between(&report.mean, &baseline.mean),
        accounting: Accounting {
            schedule: warm_start_schedule(epochs, sizes.splits, spec.train.warm_start),
            cold_epochs_per_run: epochs * sizes.splits,
            epochs_per_run: report.runs.iter().map(|r| r.epochs).collect(),
        },
        model: ModelRuns {
            kind: spec.kind(),
            report,
        },
        baseline: ModelRuns {
            kind: ModelKind::Lvm,
            report: baseline,
        },
        timing: Timing {
            model_secs,
            baseline_secs,
            total_secs: start.elapsed().as_secs_f64(),
        },
        config,
    })
}
