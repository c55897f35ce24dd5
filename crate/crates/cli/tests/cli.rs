use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use trendline::evaluation::percent_improvement;
use trendline::models::{Architecture, ModelKind, ModelSpec, TrainConfig};
use trendline::segmentation::{segment_bottom_up, CostKind, SegmentationConfig};
use trendline::series::TimeSeries;
use trendline_cli::config::{Column, DatasetConfig, ExperimentConfig, ModelEntry, PartitionEntry, PartitionSizes};
use trendline_cli::data::parse_trend_table;
use trendline_cli::{presets, run, ReportFile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trendline"))
}

/// Triangle wave, six points up and six down, with a small deterministic wobble.
fn sawtooth(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| {
            let p = i % 12;
            let v = if p < 6 { p as f64 } else { (11 - p) as f64 };
            v + 0.01 * ((i * 7919) % 13) as f64 / 13.0
        })
        .collect()
}

fn write_series(dir: &Path, name: &str, header: &str, values: &[f64]) -> PathBuf {
    let mut text = format!("{header}\n");
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn small_experiment(path: PathBuf, spec: ModelSpec) -> ExperimentConfig {
    ExperimentConfig {
        preset: None,
        dataset: DatasetConfig {
            path,
            column: Column::Name("value".into()),
            delimiter: ',',
            missing: "?".into(),
            has_header: true,
        },
        segmentation: SegmentationConfig {
            max_error: 0.05,
            cost: CostKind::MeanSquaredResidual,
        },
        features: Default::default(),
        model: ModelEntry::Spec(spec),
        partition: PartitionEntry::Sizes(PartitionSizes {
            splits: 3,
            test: 10,
            val: 5,
            train: 40,
        }),
        runs: trendline_cli::config::RunsConfig {
            n_runs: 3,
            seed_base: 11,
        },
        output: Default::default(),
    }
}

fn mlp() -> ModelSpec {
    ModelSpec::new(
        Architecture::Mlp {
            layers: vec![8],
            dropout: 0.0,
        },
        TrainConfig {
            batch_size: 8,
            epochs: 20,
            learning_rate: 0.01,
            warm_start: 0.5,
            ..TrainConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn preset_configs_round_trip() {
    for name in presets::NAMES {
        for kind in ModelKind::ALL {
            let cfg = presets::experiment(name, kind).unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg);
            let resolved = cfg.resolved().unwrap();
            let back = ExperimentConfig::from_toml(&resolved.to_toml().unwrap()).unwrap();
            assert_eq!(back, resolved, "{name}/{kind}");
            assert_eq!(back.model_spec().unwrap(), cfg.model_spec().unwrap());
        }
    }
}

proptest! {
    #[test]
    fn explicit_configs_round_trip(
        splits in 1usize..50, test in 1usize..100, max_error in 0.0f64..100.0,
        seed in any::<u64>(), lr in 1e-6f64..1.0, layers in prop::collection::vec(1usize..600, 1..=5),
    ) {
        let spec = ModelSpec::new(
            Architecture::Mlp { layers, dropout: 0.25 },
            TrainConfig { learning_rate: lr, ..TrainConfig::default() },
        ).unwrap();
        let mut cfg = small_experiment("x.csv".into(), spec);
        cfg.partition = PartitionEntry::Sizes(PartitionSizes { splits, test, val: 3, train: 7 });
        cfg.segmentation.max_error = max_error;
        cfg.runs.seed_base = seed;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn report_is_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(dir.path(), "saw.csv", "value", &sawtooth(1200));
    let cfg = small_experiment(path, mlp());
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.without_timing().to_json().unwrap(), b.without_timing().to_json().unwrap());

    let (m, l) = (&a.model.report.mean, &a.baseline.report.mean);
    assert_eq!(a.improvement.slope, Some(percent_improvement(m.slope, l.slope).unwrap()));
    assert_eq!(a.improvement.average, Some(percent_improvement(m.average, l.average).unwrap()));
    assert_eq!(a.model.report.runs.len(), 3);
    assert_eq!(a.accounting.epochs_per_run, vec![40; 3]);

    // The echoed config reproduces the report.
    let again = run(&a.config).unwrap();
    assert_eq!(again.without_timing(), a.without_timing());
    let back = ReportFile::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn jse_lvm_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(dir.path(), "jse.csv", "Close", &sawtooth(6012));
    let mut cfg = presets::experiment("jse", ModelKind::Lvm).unwrap();
    cfg.dataset.path = path;
    cfg.segmentation.max_error = 0.05;
    let r = run(&cfg).unwrap();
    assert!(r.dataset.n_instances >= 1001, "{}", r.dataset.n_instances);
    for rep in [&r.model.report, &r.baseline.report] {
        assert_eq!((rep.std.slope, rep.std.duration, rep.std.average), (0.0, 0.0, 0.0));
    }
    assert_eq!(r.model.report.runs.len(), 10);
    assert_eq!(r.model.report.runs[0].metrics.slope, r.baseline.report.runs[0].metrics.slope);
}

#[test]
fn stats_on_two_trends() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(dir.path(), "v.csv", "value", &[3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 3.0]);
    let out = bin()
        .args(["stats", "--data"])
        .arg(&path)
        .args(["--column", "value", "--max-error", "0.01"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("n_trends=2"), "{stdout}");
    assert!(stdout.contains("n_instances=1"), "{stdout}");
}

#[test]
fn segment_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let values = sawtooth(150);
    let path = write_series(dir.path(), "s.csv", "value", &values);
    let table = dir.path().join("trends.csv");
    let status = bin()
        .args(["segment", "--data"])
        .arg(&path)
        .args(["--column", "0", "--max-error", "0.05", "--out"])
        .arg(&table)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed = parse_trend_table(&std::fs::read_to_string(&table).unwrap()).unwrap();
    let cfg = SegmentationConfig::new(0.05, CostKind::MeanSquaredResidual).unwrap();
    let direct = segment_bottom_up(&TimeSeries::new(values).unwrap(), &cfg).unwrap();
    assert_eq!(parsed, direct);
}

#[test]
fn run_and_compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_series(dir.path(), "saw.csv", "value", &sawtooth(1200));
    let mut reports = Vec::new();
    for (i, spec) in [ModelSpec::lvm(), mlp()].into_iter().enumerate() {
        let mut cfg = small_experiment(data.clone(), spec);
        cfg.runs.n_runs = 2;
        let cfg_path = dir.path().join(format!("exp{i}.toml"));
        std::fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
        let report = dir.path().join(format!("report{i}.json"));
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg_path)
            .args(["--seed", "5", "--out"])
            .arg(&report)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("% improv."));
        reports.push(report);
    }
    let a = ReportFile::load(&reports[0]).unwrap();
    let b = ReportFile::load(&reports[1]).unwrap();
    assert_eq!(a.model.report.runs[0].seed, 5);

    let out = bin().arg("report").args(&reports).args(["--format", "machine"]).output().unwrap();
    assert!(out.status.success());
    let imp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let want = percent_improvement(b.model.report.mean.average, a.model.report.mean.average).unwrap();
    assert_eq!(imp["average"].as_f64().unwrap(), want);

    let out = bin().arg("report").args(&reports).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("MLP") && text.contains("LVM"), "{text}");
}

#[test]
fn plot_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_series(dir.path(), "saw.csv", "value", &sawtooth(48));
    let out_dir = dir.path().join("plots");
    let status = bin().args(["plot", "--data"]).arg(&data).arg("--out").arg(&out_dir).status().unwrap();
    assert!(status.success());
    let series = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 49);
    let hist = std::fs::read_to_string(out_dir.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
}

#[test]
fn failures_name_their_stage() {
    let out = bin().args(["stats", "--data", "/nonexistent/x.csv"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: load:"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let data = write_series(dir.path(), "short.csv", "value", &sawtooth(60));
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, small_experiment(data, mlp()).to_toml().unwrap()).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("partition:") && err.contains("need at least 75"), "{err}");

    let out = bin().args(["run", "--preset", "sunspots"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));
}

#[test]
fn preset_command_prints_a_loadable_config() {
    let out = bin().args(["preset", "nyse", "--model", "rf"]).output().unwrap();
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(matches!(cfg.model_spec().unwrap().arch, Architecture::Rf { n_estimators: 200, .. }));
}
