use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use trendline::models::{ModelKind, ModelSpec};
use trendline::segmentation::{FeatureMode, SegmentationConfig};

use crate::presets;

/// Which column holds the series: a header name or a zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => write!(f, "{n:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub column: Column,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_missing")]
    pub missing: String,
    #[serde(default = "yes")]
    pub has_header: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> String {
    "?".into()
}

fn yes() -> bool {
    true
}

fn default_history() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    #[serde(default)]
    pub mode: FeatureMode,
    #[serde(default = "default_history")]
    pub history: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            mode: FeatureMode::RawOnly,
            history: default_history(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSizes {
    pub splits: usize,
    pub test: usize,
    pub val: usize,
    pub train: usize,
}

/// A preset name or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionEntry {
    Preset(String),
    Sizes(PartitionSizes),
}

/// A model kind taken from the preset, or a full spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Kind(String),
    Spec(ModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsConfig {
    #[serde(default = "ten")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed_base: u64,
}

fn ten() -> usize {
    10
}

impl Default for RunsConfig {
    fn default() -> Self {
        Self {
            n_runs: 10,
            seed_base: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Human,
    Machine,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Preset that named model and partition entries resolve against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub dataset: DatasetConfig,
    pub segmentation: SegmentationConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    pub model: ModelEntry,
    pub partition: PartitionEntry,
    #[serde(default)]
    pub runs: RunsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.segmentation.validate()?;
        self.model_spec()?;
        self.partition_sizes()?;
        if self.runs.n_runs == 0 {
            bail!("runs.n_runs must be >= 1");
        }
        if self.features.history == 0 {
            bail!("features.history must be >= 1");
        }
        Ok(())
    }

    fn preset_name(&self, what: &str) -> anyhow::Result<&str> {
        self.preset
            .as_deref()
            .with_context(|| format!("{what} refers to a preset but no preset is set"))
    }

    pub fn model_spec(&self) -> anyhow::Result<ModelSpec> {
        let spec = match &self.model {
            ModelEntry::Spec(spec) => spec.clone(),
            ModelEntry::Kind(kind) => {
                let kind: ModelKind = kind.parse()?;
                if kind == ModelKind::Lvm {
                    ModelSpec::lvm()
                } else {
                    presets::model(self.preset_name("model")?, kind)?
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn partition_sizes(&self) -> anyhow::Result<PartitionSizes> {
        match &self.partition {
            PartitionEntry::Sizes(s) => Ok(*s),
            PartitionEntry::Preset(name) => presets::partition(name),
        }
    }

    /// The same experiment with every preset reference expanded.
    pub fn resolved(&self) -> anyhow::Result<Self> {
        Ok(Self {
            preset: None,
            model: ModelEntry::Spec(self.model_spec()?),
            partition: PartitionEntry::Sizes(self.partition_sizes()?),
            ..self.clone()
        })
    }
}
