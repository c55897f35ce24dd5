//! Tuned hyperparameters and partition sizes for the four reference
//! datasets.

use anyhow::bail;
use trendline::models::{Architecture, Bootstrap, ModelKind, ModelSpec, Pooling, TrainConfig};
use trendline::segmentation::{CostKind, SegmentationConfig};

use crate::config::{
    Column, DatasetConfig, ExperimentConfig, FeatureConfig, ModelEntry, OutputConfig, PartitionEntry,
    PartitionSizes, RunsConfig,
};

pub const NAMES: [&str; 4] = ["voltage", "methane", "nyse", "jse"];

/// Placeholder segmentation threshold; calibrate it per dataset.
pub const DEFAULT_MAX_ERROR: f64 = 1.0;

fn unknown(name: &str) -> anyhow::Error {
    anyhow::anyhow!("unknown preset {name:?} (expected one of {})", NAMES.join(", "))
}

fn train(batch_size: usize, epochs: usize, learning_rate: f64, weight_decay: f64, warm_start: f64) -> TrainConfig {
    TrainConfig {
        batch_size,
        epochs,
        learning_rate,
        weight_decay,
        warm_start,
        standardize: false,
    }
}

pub fn partition(name: &str) -> anyhow::Result<PartitionSizes> {
    let (splits, test, val, train) = match name {
        "voltage" => (8, 4227, 4227, 4227),
        "methane" => (44, 10, 10, 3967),
        "nyse" => (5, 1001, 1001, 4008),
        "jse" => (101, 1, 1, 899),
        _ => return Err(unknown(name)),
    };
    Ok(PartitionSizes {
        splits,
        test,
        val,
        train,
    })
}

fn trenet(name: &str) -> anyhow::Result<ModelSpec> {
    let (cells, filters, kernel, fusion, l2, batch, epochs, ws) = match name {
        "voltage" => (600, [16, 16], 2, 300, 5e-4, 2000, 100, 0.2),
        "methane" => (1500, [4, 4], 2, 1200, 5e-4, 2000, 2000, 0.1),
        "nyse" => (600, [128, 128], 2, 300, 0.0, 5000, 100, 0.5),
        // A two-point window leaves no room for two kernel-2 convolutions.
        "jse" => (5, [32, 32], 1, 10, 0.0, 500, 100, 0.05),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Trenet {
            lstm_cells: cells,
            filters,
            kernel,
            fusion,
            dropout: 0.0,
        },
        train(batch, epochs, 1e-3, l2, ws),
    )?)
}

fn mlp(name: &str) -> anyhow::Result<ModelSpec> {
    let (batch, ws, lr, wd, epochs, layers) = match name {
        "voltage" => (4000, 0.1, 1e-4, 0.0, 10000, vec![500, 400, 300]),
        "methane" => (250, 0.1, 1e-3, 0.0, 15000, vec![500, 400]),
        "nyse" => (5000, 0.7, 1e-3, 5e-4, 500, vec![500, 400, 300]),
        "jse" => (250, 0.05, 1e-3, 0.0, 100, vec![100]),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Mlp { layers, dropout: 0.0 },
        train(batch, epochs, lr, wd, ws),
    )?)
}

fn lstm(name: &str) -> anyhow::Result<ModelSpec> {
    let (batch, ws, lr, dropout, wd, epochs, cells) = match name {
        "voltage" => (4000, 0.1, 1e-2, 0.0, 0.0, 1000, vec![600]),
        "methane" => (2000, 0.1, 1e-4, 0.0, 0.0, 15000, vec![600, 300]),
        "nyse" => (5000, 0.01, 1e-3, 0.5, 5e-5, 100, vec![100]),
        "jse" => (1000, 0.05, 1e-3, 0.5, 0.0, 100, vec![100]),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Lstm { cells, dropout },
        train(batch, epochs, lr, wd, ws),
    )?)
}

fn cnn(name: &str) -> anyhow::Result<ModelSpec> {
    let (batch, ws, wd, epochs, filters, kernels, pool) = match name {
        "voltage" => (2000, 0.5, 5e-5, 15000, vec![16], vec![2], Pooling::Max { size: 2 }),
        "methane" => (250, 0.3, 5e-4, 1000, vec![32, 32], vec![2, 4], Pooling::Max { size: 5 }),
        "nyse" => (5000, 0.4, 0.0, 12000, vec![32], vec![1], Pooling::Identity),
        "jse" => (1000, 0.1, 0.0, 100, vec![32, 32], vec![1, 1], Pooling::Identity),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Cnn {
            filters,
            kernels,
            pool,
            dropout: 0.0,
        },
        train(batch, epochs, 1e-3, wd, ws),
    )?)
}

fn rf(name: &str) -> anyhow::Result<ModelSpec> {
    let (n_estimators, depth, bootstrap, warm_start) = match name {
        "voltage" => (50, 2, Bootstrap::Samples(2000), false),
        "methane" => (50, 10, Bootstrap::Enabled(false), false),
        "nyse" => (200, 1, Bootstrap::Enabled(true), true),
        "jse" => (100, 1, Bootstrap::Enabled(false), true),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Rf {
            n_estimators,
            max_depth: Some(depth),
            bootstrap,
            warm_start,
        },
        TrainConfig::default(),
    )?)
}

fn gbm(name: &str) -> anyhow::Result<ModelSpec> {
    let (n_estimators, learning_rate) = match name {
        "voltage" => (1, 2000.0),
        "methane" => (10000, 0.1),
        "nyse" => (1, 0.2),
        "jse" => (4, 0.1),
        _ => return Err(unknown(name)),
    };
    Ok(ModelSpec::new(
        Architecture::Gbm {
            n_estimators,
            learning_rate,
            max_depth: None,
        },
        TrainConfig::default(),
    )?)
}

pub fn model(name: &str, kind: ModelKind) -> anyhow::Result<ModelSpec> {
    match kind {
        ModelKind::Lvm => {
            partition(name)?;
            Ok(ModelSpec::lvm())
        }
        ModelKind::Mlp => mlp(name),
        ModelKind::Lstm => lstm(name),
        ModelKind::Cnn => cnn(name),
        ModelKind::Trenet => trenet(name),
        ModelKind::Rf => rf(name),
        ModelKind::Gbm => gbm(name),
    }
}

fn dataset(name: &str) -> anyhow::Result<DatasetConfig> {
    let (path, column, delimiter) = match name {
        "voltage" => ("data/household_power_consumption.txt", "Voltage", ';'),
        "methane" => ("data/methane.csv", "value", ','),
        "nyse" => ("data/nyse.csv", "Close", ','),
        "jse" => ("data/jse.csv", "Close", ','),
        _ => bail!(unknown(name)),
    };
    Ok(DatasetConfig {
        path: path.into(),
        column: Column::Name(column.into()),
        delimiter,
        missing: "?".into(),
        has_header: true,
    })
}

/// Full experiment config for a preset dataset and model kind.
pub fn experiment(name: &str, kind: ModelKind) -> anyhow::Result<ExperimentConfig> {
    model(name, kind)?;
    Ok(ExperimentConfig {
        preset: Some(name.into()),
        dataset: dataset(name)?,
        segmentation: SegmentationConfig {
            max_error: DEFAULT_MAX_ERROR,
            cost: CostKind::MeanSquaredResidual,
        },
        features: FeatureConfig::default(),
        model: ModelEntry::Kind(kind.name().into()),
        partition: PartitionEntry::Preset(name.into()),
        runs: RunsConfig::default(),
        output: OutputConfig::default(),
    })
}
