//! Random forest (two-output trees) and gradient boosting (one additive
//! ensemble per output) over flat feature vectors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use super::Prediction;
use crate::error::{Error, Result};
use crate::nn::Seed;
use crate::segmentation::Instance;

pub(crate) fn design(instances: &[Instance]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let first = instances.first().ok_or(Error::EmptyInput)?;
    let d = first.feature_len();
    let mut x = Vec::with_capacity(instances.len());
    let mut y = Vec::with_capacity(instances.len());
    for inst in instances {
        if inst.feature_len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: inst.feature_len(),
            });
        }
        x.push(inst.features());
        y.push(inst.target_pair().to_vec());
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    /// Rows drawn with replacement per tree; `None` uses every row once.
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
}

fn grow_trees(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    params: &ForestParams,
    first_index: usize,
    seed: Seed,
) -> Vec<RegressionTree> {
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        ..TreeParams::default()
    };
    (first_index..first_index + params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let rows: Vec<usize> = match params.bootstrap {
                None => (0..x.len()).collect(),
                Some(k) => {
                    let mut rng = seed.derive(t as u64).rng();
                    (0..k.max(1)).map(|_| rng.random_range(0..x.len())).collect()
                }
            };
            RegressionTree::fit(x, y, &rows, &tree_params)
        })
        .collect()
}

/// Fit a forest; tree `t` draws its bootstrap rows from `seed.derive(t)`.
pub fn rf_fit(instances: &[Instance], params: &ForestParams, seed: Seed) -> Result<Forest> {
    let (x, y) = design(instances)?;
    Ok(Forest {
        trees: grow_trees(&x, &y, params, 0, seed),
        n_features: x[0].len(),
    })
}

/// Keep the existing trees and grow `params.n_estimators` more on
/// `instances`.
pub fn rf_fit_more(forest: &Forest, instances: &[Instance], params: &ForestParams, seed: Seed) -> Result<Forest> {
    let (x, y) = design(instances)?;
    if x[0].len() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: x[0].len(),
        });
    }
    let mut trees = forest.trees.clone();
    trees.extend(grow_trees(&x, &y, params, forest.trees.len(), seed));
    Ok(Forest {
        trees,
        n_features: forest.n_features,
    })
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_features(&self, x: &[f64]) -> Prediction {
        let mut sum = [0.0; 2];
        for t in &self.trees {
            let v = t.predict(x);
            sum[0] += v[0];
            sum[1] += v[1];
        }
        let n = self.trees.len() as f64;
        Prediction {
            slope: sum[0] / n,
            duration: sum[1] / n,
        }
    }
}

pub fn rf_predict(forest: &Forest, instance: &Instance) -> Result<Prediction> {
    if instance.feature_len() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: instance.feature_len(),
        });
    }
    Ok(forest.predict_features(&instance.features()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
}

/// Squared-loss gradient boosting, one ensemble per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    init: [f64; 2],
    stages: [Vec<RegressionTree>; 2],
    learning_rate: f64,
    n_features: usize,
    /// Training MSE summed over both outputs, before any stage and after
    /// each one.
    loss_trace: Vec<f64>,
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

pub fn gbm_fit(instances: &[Instance], params: &BoostParams) -> Result<Gbm> {
    let (x, y) = design(instances)?;
    let n = x.len();
    let rows: Vec<usize> = (0..n).collect();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        ..TreeParams::default()
    };
    let targets: [Vec<f64>; 2] = [
        y.iter().map(|r| r[0]).collect(),
        y.iter().map(|r| r[1]).collect(),
    ];
    let init = [
        targets[0].iter().sum::<f64>() / n as f64,
        targets[1].iter().sum::<f64>() / n as f64,
    ];
    let mut fitted = [vec![init[0]; n], vec![init[1]; n]];
    let mut stages: [Vec<RegressionTree>; 2] = [Vec::new(), Vec::new()];
    let loss = |f: &[Vec<f64>; 2]| mse(&f[0], &targets[0]) + mse(&f[1], &targets[1]);
    let mut loss_trace = vec![loss(&fitted)];

    for _ in 0..params.n_estimators {
        for out in 0..2 {
            let residuals: Vec<Vec<f64>> = (0..n)
                .map(|i| vec![targets[out][i] - fitted[out][i]])
                .collect();
            let tree = RegressionTree::fit(&x, &residuals, &rows, &tree_params);
            for (i, xi) in x.iter().enumerate() {
                fitted[out][i] += params.learning_rate * tree.predict(xi)[0];
            }
            stages[out].push(tree);
        }
        loss_trace.push(loss(&fitted));
    }

    Ok(Gbm {
        init,
        stages,
        learning_rate: params.learning_rate,
        n_features: x[0].len(),
        loss_trace,
    })
}

impl Gbm {
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_features(&self, x: &[f64]) -> Prediction {
        let out = |k: usize| {
            self.init[k]
                + self.stages[k]
                    .iter()
                    .map(|t| self.learning_rate * t.predict(x)[0])
                    .sum::<f64>()
        };
        Prediction {
            slope: out(0),
            duration: out(1),
        }
    }
}

pub fn gbm_predict(model: &Gbm, instance: &Instance) -> Result<Prediction> {
    if instance.feature_len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            got: instance.feature_len(),
        });
    }
    Ok(model.predict_features(&instance.features()))
}
