use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven predictor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lvm,
    Mlp,
    Lstm,
    Cnn,
    Trenet,
    Rf,
    Gbm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Lvm,
        ModelKind::Mlp,
        ModelKind::Lstm,
        ModelKind::Cnn,
        ModelKind::Trenet,
        ModelKind::Rf,
        ModelKind::Gbm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lvm => "lvm",
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
            ModelKind::Cnn => "cnn",
            ModelKind::Trenet => "trenet",
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(
            self,
            ModelKind::Mlp | ModelKind::Lstm | ModelKind::Cnn | ModelKind::Trenet
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Pooling {
    Max { size: usize },
    Identity,
}

/// Per-tree resampling for the random forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bootstrap {
    /// `true`: draw as many rows as the training set, with replacement.
    Enabled(bool),
    /// Draw this many rows with replacement.
    Samples(usize),
}

impl Bootstrap {
    pub fn sample_size(self, n: usize) -> Option<usize> {
        match self {
            Bootstrap::Enabled(false) => None,
            Bootstrap::Enabled(true) => Some(n),
            Bootstrap::Samples(k) => Some(k),
        }
    }
}

/// Kind-specific architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Lvm,
    Mlp {
        /// Hidden layer widths.
        layers: Vec<usize>,
        #[serde(default)]
        dropout: f64,
    },
    Lstm {
        cells: Vec<usize>,
        #[serde(default)]
        dropout: f64,
    },
    Cnn {
        filters: Vec<usize>,
        kernels: Vec<usize>,
        pool: Pooling,
        #[serde(default)]
        dropout: f64,
    },
    Trenet {
        lstm_cells: usize,
        filters: [usize; 2],
        kernel: usize,
        fusion: usize,
        #[serde(default)]
        dropout: f64,
    },
    Rf {
        n_estimators: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_depth: Option<usize>,
        bootstrap: Bootstrap,
        #[serde(default)]
        warm_start: bool,
    },
    Gbm {
        n_estimators: usize,
        learning_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_depth: Option<usize>,
    },
}

/// Gradient-training hyperparameters. Tree models and the LVM ignore them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Fraction of `epochs` spent on each warm-started update.
    #[serde(default = "one")]
    pub warm_start: f64,
    /// Z-score inputs with training-set statistics.
    #[serde(default)]
    pub standardize: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            warm_start: 1.0,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Depth used for boosting stages when none is given.
pub const DEFAULT_GBM_DEPTH: usize = 3;

impl ModelSpec {
    pub fn new(arch: Architecture, train: TrainConfig) -> Result<Self> {
        let spec = Self { arch, train };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lvm() -> Self {
        Self {
            arch: Architecture::Lvm,
            train: TrainConfig::default(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.arch {
            Architecture::Lvm => ModelKind::Lvm,
            Architecture::Mlp { .. } => ModelKind::Mlp,
            Architecture::Lstm { .. } => ModelKind::Lstm,
            Architecture::Cnn { .. } => ModelKind::Cnn,
            Architecture::Trenet { .. } => ModelKind::Trenet,
            Architecture::Rf { .. } => ModelKind::Rf,
            Architecture::Gbm { .. } => ModelKind::Gbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.kind())));
        let check_dropout = |p: f64| {
            if (0.0..1.0).contains(&p) {
                Ok(())
            } else {
                bad(format!("dropout {p} outside [0, 1)"))
            }
        };
        let check_count = |what: &str, n: usize, max: usize| {
            if (1..=max).contains(&n) {
                Ok(())
            } else {
                bad(format!("{n} {what} layers, allowed 1..={max}"))
            }
        };
        let positive = |what: &str, v: &[usize]| {
            if v.iter().all(|x| *x >= 1) {
                Ok(())
            } else {
                bad(format!("{what} must all be >= 1"))
            }
        };
        match &self.arch {
            Architecture::Lvm => {}
            Architecture::Mlp { layers, dropout } => {
                check_count("dense", layers.len(), 5)?;
                positive("layer widths", layers)?;
                check_dropout(*dropout)?;
            }
            Architecture::Lstm { cells, dropout } => {
                check_count("lstm", cells.len(), 3)?;
                positive("cells", cells)?;
                check_dropout(*dropout)?;
            }
            Architecture::Cnn {
                filters,
                kernels,
                pool,
                dropout,
            } => {
                check_count("conv", filters.len(), 3)?;
                if kernels.len() != filters.len() {
                    return bad(format!(
                        "{} filter entries but {} kernel entries",
                        filters.len(),
                        kernels.len()
                    ));
                }
                positive("filters", filters)?;
                positive("kernels", kernels)?;
                if let Pooling::Max { size: 0 } = pool {
                    return bad("pool size must be >= 1".into());
                }
                check_dropout(*dropout)?;
            }
            Architecture::Trenet {
                lstm_cells,
                filters,
                kernel,
                fusion,
                dropout,
            } => {
                positive("trenet sizes", &[*lstm_cells, filters[0], filters[1], *kernel, *fusion])?;
                check_dropout(*dropout)?;
            }
            Architecture::Rf {
                n_estimators,
                bootstrap,
                ..
            } => {
                if *n_estimators == 0 {
                    return bad("n_estimators must be >= 1".into());
                }
                if *bootstrap == Bootstrap::Samples(0) {
                    return bad("bootstrap sample size must be >= 1".into());
                }
            }
            Architecture::Gbm { learning_rate, .. } => {
                if !(*learning_rate >= 0.0) || !learning_rate.is_finite() {
                    return bad(format!("learning rate {learning_rate} must be finite and >= 0"));
                }
            }
        }
        let t = &self.train;
        if !(0.0..=1.0).contains(&t.warm_start) {
            return bad(format!("warm start fraction {} outside [0, 1]", t.warm_start));
        }
        if self.kind().is_neural() {
            if t.batch_size == 0 {
                return bad("batch size must be >= 1".into());
            }
            if !(t.learning_rate >= 0.0) || !(t.weight_decay >= 0.0) {
                return bad("learning rate and weight decay must be >= 0".into());
            }
        }
        Ok(())
    }
}
