//! The seven next-trend predictors behind one fit / warm-start / predict
//! contract.

mod ensemble;
mod neural;
mod spec;
mod tree;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ensemble::{gbm_fit, gbm_predict, rf_fit, rf_fit_more, rf_predict, BoostParams, Forest, ForestParams, Gbm};
pub use neural::{
    build_network, cnn_layers, encode, fit_network, lstm_layers, mlp_layers, predict_network, train_network,
    warm_start_epochs, warm_start_network, InputDims, InputScaler,
};
pub use spec::{Architecture, Bootstrap, ModelKind, ModelSpec, Pooling, TrainConfig, DEFAULT_GBM_DEPTH};
pub use tree::{Node, RegressionTree, TreeParams, TIE_TOLERANCE};

use crate::error::{Error, Result};
use crate::nn::{Network, Seed};
use crate::segmentation::Instance;

/// A predicted next trend. The duration is an unclamped real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub slope: f64,
    pub duration: f64,
}

impl Prediction {
    pub fn pair(self) -> [f64; 2] {
        [self.slope, self.duration]
    }
}

/// Echo the current trend.
pub fn lvm_predict(instance: &Instance) -> Prediction {
    Prediction {
        slope: instance.current_trend.slope,
        duration: instance.current_trend.duration as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ModelState {
    Lvm,
    Network {
        network: Network,
        dims: InputDims,
        scaler: Option<InputScaler>,
    },
    Forest(Forest),
    Gbm(Gbm),
}

/// A trained predictor together with the spec it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ModelSpec,
    state: ModelState,
}

/// Per-epoch training loss of one fit; empty for non-gradient models.
pub type LossTrace = Vec<f64>;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: Model,
}

fn forest_params(spec: &ModelSpec, n: usize) -> Option<ForestParams> {
    match spec.arch {
        Architecture::Rf {
            n_estimators,
            max_depth,
            bootstrap,
            ..
        } => Some(ForestParams {
            n_estimators,
            max_depth,
            bootstrap: bootstrap.sample_size(n),
        }),
        _ => None,
    }
}

fn boost_params(spec: &ModelSpec) -> Option<BoostParams> {
    match spec.arch {
        Architecture::Gbm {
            n_estimators,
            learning_rate,
            max_depth,
        } => Some(BoostParams {
            n_estimators,
            learning_rate,
            max_depth: Some(max_depth.unwrap_or(DEFAULT_GBM_DEPTH)),
        }),
        _ => None,
    }
}

impl Model {
    /// Train from scratch.
    pub fn fit(spec: &ModelSpec, instances: &[Instance], seed: Seed) -> Result<(Self, LossTrace)> {
        spec.validate()?;
        let first = instances.first().ok_or(Error::EmptyInput)?;
        let (state, trace) = match spec.kind() {
            ModelKind::Lvm => (ModelState::Lvm, Vec::new()),
            ModelKind::Rf => {
                let p = forest_params(spec, instances.len()).expect("rf spec");
                (ModelState::Forest(rf_fit(instances, &p, seed)?), Vec::new())
            }
            ModelKind::Gbm => {
                let p = boost_params(spec).expect("gbm spec");
                (ModelState::Gbm(gbm_fit(instances, &p)?), Vec::new())
            }
            _ => {
                let dims = InputDims::of(first);
                let network = build_network(spec, dims, seed.derive(0))?;
                let scaler = spec.train.standardize.then(|| InputScaler::fit(instances));
                let (network, trace) = neural::fit_network_epochs(
                    &network,
                    instances,
                    spec,
                    spec.train.epochs,
                    scaler.as_ref(),
                    seed.derive(1),
                )?;
                (ModelState::Network { network, dims, scaler }, trace)
            }
        };
        Ok((
            Self {
                spec: spec.clone(),
                state,
            },
            trace,
        ))
    }

    /// Update on new training data starting from this model. Networks train
    /// for `ceil(warm_start * epochs)` epochs from their current weights, a
    /// warm-start forest grows more trees, and every other kind refits.
    pub fn warm_start_fit(&self, instances: &[Instance], seed: Seed) -> Result<(Self, LossTrace)> {
        match &self.state {
            ModelState::Network { network, dims, scaler } => {
                let first = instances.first().ok_or(Error::EmptyInput)?;
                if InputDims::of(first) != *dims {
                    return Err(Error::ArchitectureMismatch(format!(
                        "trained on {dims:?}, got {:?}",
                        InputDims::of(first)
                    )));
                }
                let epochs = warm_start_epochs(self.spec.train.epochs, self.spec.train.warm_start);
                let (network, trace) =
                    neural::fit_network_epochs(network, instances, &self.spec, epochs, scaler.as_ref(), seed.derive(1))?;
                Ok((
                    Self {
                        spec: self.spec.clone(),
                        state: ModelState::Network {
                            network,
                            dims: *dims,
                            scaler: scaler.clone(),
                        },
                    },
                    trace,
                ))
            }
            ModelState::Forest(forest) if matches!(self.spec.arch, Architecture::Rf { warm_start: true, .. }) => {
                let p = forest_params(&self.spec, instances.len()).expect("rf spec");
                let forest = rf_fit_more(forest, instances, &p, seed)?;
                Ok((
                    Self {
                        spec: self.spec.clone(),
                        state: ModelState::Forest(forest),
                    },
                    Vec::new(),
                ))
            }
            _ => Self::fit(&self.spec, instances, seed),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.state {
            ModelState::Network { network, .. } => Some(network),
            _ => None,
        }
    }

    pub fn predict(&self, instance: &Instance) -> Result<Prediction> {
        let p = match &self.state {
            ModelState::Lvm => lvm_predict(instance),
            ModelState::Forest(f) => rf_predict(f, instance)?,
            ModelState::Gbm(g) => gbm_predict(g, instance)?,
            ModelState::Network { network, dims, scaler } => {
                let got = InputDims::of(instance);
                if got != *dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims.features,
                        got: got.features,
                    });
                }
                predict_network(network, &encode(self.kind(), instance, scaler.as_ref())?)?
            }
        };
        Ok(p)
    }

    /// Order-preserving predictions with dropout disabled.
    pub fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<Prediction>> {
        instances.par_iter().map(|i| self.predict(i)).collect()
    }

    pub fn to_checkpoint(&self) -> Result<String> {
        serde_json::to_string(&Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model.spec.validate()?;
        Ok(ck.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()?).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(&text)
    }
}
