use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use trendline::models::ModelKind;
use trendline::segmentation::{segment_bottom_up, CostKind, FeatureMode, SegmentationConfig};
use trendline::series::{dataset_stats, impute_missing, TimeSeries, TrendSequence};
use trendline_cli::config::{Column, DatasetConfig, ExperimentConfig, Format, ModelEntry};
use trendline_cli::data::{load_csv, trend_table, write_atomic};
use trendline_cli::experiment::{run, ReportFile};
use trendline_cli::{emit_plot_data, presets, report};

#[derive(Parser)]
#[command(name = "trendline", version, about = "Trend-line segmentation and next-trend prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a series and print its trend table.
    Segment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics after segmentation.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 8)]
        history: usize,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Run a full walk-forward experiment.
    Run(RunArgs),
    /// Print a report, or the improvement of a second report over a first.
    Report {
        first: PathBuf,
        second: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Write series and histogram tables for plotting.
    Plot {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a preset experiment config.
    Preset {
        name: String,
        #[arg(long, default_value = "trenet")]
        model: String,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Take dataset and segmentation settings from a config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Column name, or zero-based index.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long)]
    missing: Option<String>,
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    max_error: Option<f64>,
    #[arg(long, value_enum)]
    cost: Option<CostArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CostArg {
    Mean,
    Sum,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Dataset path, overriding the config's.
    #[arg(long)]
    data: Option<PathBuf>,
    /// First run seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_error: Option<f64>,
    /// Report path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn parse_column(s: &str) -> Column {
    s.parse().map_or_else(|_| Column::Name(s.to_string()), Column::Index)
}

impl DataArgs {
    fn resolve(&self) -> anyhow::Result<(DatasetConfig, SegmentationConfig)> {
        let base = self.config.as_deref().map(ExperimentConfig::load).transpose()?;
        let mut dataset = match (&base, &self.data) {
            (_, Some(path)) => DatasetConfig {
                path: path.clone(),
                column: Column::Index(0),
                delimiter: ',',
                missing: "?".into(),
                has_header: true,
            },
            (Some(cfg), None) => cfg.dataset.clone(),
            (None, None) => bail!("either --data or --config is required"),
        };
        if let Some(c) = &self.column {
            dataset.column = parse_column(c);
        }
        if let Some(d) = self.delimiter {
            dataset.delimiter = d;
        }
        if let Some(m) = &self.missing {
            dataset.missing = m.clone();
        }
        if self.no_header {
            dataset.has_header = false;
        }
        let mut seg = base.map_or(
            SegmentationConfig {
                max_error: presets::DEFAULT_MAX_ERROR,
                cost: CostKind::MeanSquaredResidual,
            },
            |c| c.segmentation,
        );
        if let Some(e) = self.max_error {
            seg.max_error = e;
        }
        match self.cost {
            Some(CostArg::Mean) => seg.cost = CostKind::MeanSquaredResidual,
            Some(CostArg::Sum) => seg.cost = CostKind::SumSquaredResidual,
            None => {}
        }
        seg.validate().context("config")?;
        Ok((dataset, seg))
    }

    fn segmented(&self) -> anyhow::Result<(TimeSeries, TimeSeries, TrendSequence)> {
        let (dataset, seg) = self.resolve().context("config")?;
        let raw = load_csv(&dataset).context("load")?;
        let filled = impute_missing(&raw).context("impute")?;
        let trends = segment_bottom_up(&filled, &seg).context("segment")?;
        Ok((raw, filled, trends))
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).context("write"),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_command(args: &RunArgs) -> anyhow::Result<()> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => ExperimentConfig::load(path).context("config")?,
        (None, Some(name)) => {
            let kind: ModelKind = args.model.as_deref().unwrap_or("trenet").parse().context("config")?;
            presets::experiment(name, kind).context("config")?
        }
        (Some(_), Some(_)) => bail!("config: --config and --preset are mutually exclusive"),
        (None, None) => bail!("config: either --config or --preset is required"),
    };
    if let (Some(model), Some(_)) = (&args.model, &args.config) {
        cfg.model = ModelEntry::Kind(model.clone());
    }
    if let Some(p) = &args.data {
        cfg.dataset.path = p.clone();
    }
    if let Some(s) = args.seed {
        cfg.runs.seed_base = s;
    }
    if let Some(n) = args.runs {
        cfg.runs.n_runs = n;
    }
    if let Some(e) = args.max_error {
        cfg.segmentation.max_error = e;
    }
    if let Some(o) = &args.out {
        cfg.output.report = Some(o.clone());
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    cfg.validate().context("config")?;

    let report = run(&cfg)?;
    let json = report.to_json().context("report")?;
    if let Some(path) = &cfg.output.report {
        write_atomic(path, json.as_bytes()).context("write")?;
    }
    match cfg.output.format {
        Format::Human => print!("{}", report::human(&report)),
        Format::Machine => println!("{json}"),
    }
    Ok(())
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Segment { data, out } => {
            let (_, _, trends) = data.segmented()?;
            emit(&trend_table(&trends)?, out.as_ref())
        }
        Command::Stats { data, history, format } => {
            let (raw, filled, trends) = data.segmented()?;
            let stats = dataset_stats(&filled, &trends).context("stats")?;
            let window = trends.trends()[0].duration;
            match format {
                Format::Machine => println!("{}", serde_json::to_string_pretty(&stats)?),
                Format::Human => {
                    println!("n_points={}", stats.n_points);
                    println!("n_missing={}", raw.missing_count());
                    println!("n_trends={}", stats.n_trends);
                    println!("slope={:.2} ± {:.2}", stats.slope_mean, stats.slope_std);
                    println!("duration={:.2} ± {:.2}", stats.duration_mean, stats.duration_std);
                    println!("raw_feature_size={}", FeatureMode::RawOnly.feature_len(window));
                    println!("raw_plus_trend_feature_size={}", FeatureMode::RawPlusTrend.feature_len(window));
                    println!("history={history}");
                    println!("n_instances={}", stats.n_instances);
                }
            }
            Ok(())
        }
        Command::Run(args) => run_command(&args),
        Command::Report { first, second, format } => {
            let a = ReportFile::load(&first).context("report")?;
            match second {
                None => match format {
                    Format::Human => print!("{}", report::human(&a)),
                    Format::Machine => println!("{}", a.to_json()?),
                },
                Some(second) => {
                    let b = ReportFile::load(&second).context("report")?;
                    match format {
                        Format::Human => print!("{}", report::human_comparison(&a, &b)),
                        Format::Machine => {
                            println!("{}", serde_json::to_string_pretty(&report::compare(&a, &b))?)
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Plot { data, out } => {
            let (_, filled, trends) = data.segmented()?;
            let (s, h) = emit_plot_data(&filled, &trends, &out).context("plot")?;
            println!("{}\n{}", s.display(), h.display());
            Ok(())
        }
        Command::Preset { name, model } => {
            let kind: ModelKind = model.parse().context("config")?;
            print!("{}", presets::experiment(&name, kind).context("config")?.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
