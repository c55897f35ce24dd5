//! Builders and the mini-batch training loop for the four neural models.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{Architecture, ModelKind, ModelSpec, Pooling, TrainConfig};
use super::Prediction;
use crate::error::{Error, Result};
use crate::nn::{joint_loss, AdamState, LayerSpec, NetInput, Network, Seed, Sequential, Tensor, TreNet};
use crate::segmentation::Instance;

/// Input geometry a network is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    /// Flat feature length (raw window, plus 2 in raw-plus-trend mode).
    pub features: usize,
    /// Raw window length.
    pub window: usize,
    pub history: usize,
}

impl InputDims {
    pub fn of(instance: &Instance) -> Self {
        Self {
            features: instance.feature_len(),
            window: instance.local_points.len(),
            history: instance.trend_history.len(),
        }
    }
}

/// Layer list of a dense stack: each hidden layer is followed by relu, and
/// odd-numbered layers other than the last by dropout.
pub fn mlp_layers(widths: &[usize], dropout: f64) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        let number = i + 1;
        specs.push(LayerSpec::Dense { out_dim: w });
        specs.push(LayerSpec::Relu);
        if number % 2 == 1 && number != widths.len() {
            specs.push(LayerSpec::Dropout { p: dropout });
        }
    }
    specs.push(LayerSpec::Dense { out_dim: 2 });
    specs
}

pub fn lstm_layers(cells: &[usize], dropout: f64) -> Vec<LayerSpec> {
    let mut specs: Vec<LayerSpec> = cells
        .iter()
        .flat_map(|&c| {
            [
                LayerSpec::Lstm { cells: c },
                LayerSpec::Relu,
                LayerSpec::Dropout { p: dropout },
            ]
        })
        .collect();
    specs.push(LayerSpec::Dense { out_dim: 2 });
    specs
}

pub fn cnn_layers(filters: &[usize], kernels: &[usize], pool: Pooling, dropout: f64) -> Vec<LayerSpec> {
    let pool = match pool {
        Pooling::Max { size } => LayerSpec::MaxPool { size },
        Pooling::Identity => LayerSpec::IdentityPool,
    };
    let mut specs: Vec<LayerSpec> = filters
        .iter()
        .zip(kernels)
        .flat_map(|(&f, &k)| {
            [
                LayerSpec::Conv1d { filters: f, kernel: k },
                LayerSpec::Relu,
                pool.clone(),
                LayerSpec::Dropout { p: dropout },
            ]
        })
        .collect();
    specs.push(LayerSpec::Dense { out_dim: 2 });
    specs
}

/// He-initialised network for a neural `spec`.
pub fn build_network(spec: &ModelSpec, dims: InputDims, seed: Seed) -> Result<Network> {
    spec.validate()?;
    let d = dims.features;
    let net = match &spec.arch {
        Architecture::Mlp { layers, dropout } => {
            Network::Sequential(Sequential::build(&mlp_layers(layers, *dropout), &[d], seed)?)
        }
        Architecture::Lstm { cells, dropout } => {
            Network::Sequential(Sequential::build(&lstm_layers(cells, *dropout), &[d, 1], seed)?)
        }
        Architecture::Cnn {
            filters,
            kernels,
            pool,
            dropout,
        } => Network::Sequential(Sequential::build(
            &cnn_layers(filters, kernels, *pool, *dropout),
            &[1, d],
            seed,
        )?),
        Architecture::Trenet {
            lstm_cells,
            filters,
            kernel,
            fusion,
            dropout,
        } => Network::TreNet(TreNet::build(
            dims.window,
            dims.history,
            *filters,
            *kernel,
            *lstm_cells,
            *fusion,
            *dropout,
            seed,
        )?),
        _ => {
            return Err(Error::InvalidSpec(format!(
                "{} is not a neural model",
                spec.kind()
            )))
        }
    };
    Ok(net)
}

/// Per-column z-scoring fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, width: usize) -> Self {
        let n = rows.clone().count().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in rows.clone() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, row: &mut [f64]) {
        for (i, v) in row.iter_mut().enumerate() {
            let c = i % self.mean.len();
            *v = (*v - self.mean[c]) / self.scale[c];
        }
    }
}

/// Input scaling for a neural model; the history scaler is used by the
/// hybrid network only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    features: Standardizer,
    history: Standardizer,
}

impl InputScaler {
    pub fn fit(instances: &[Instance]) -> Self {
        let feats: Vec<Vec<f64>> = instances.iter().map(Instance::features).collect();
        let hist: Vec<[f64; 2]> = instances
            .iter()
            .flat_map(|i| i.trend_history.iter().map(|t| [t.slope, t.duration as f64]))
            .collect();
        let width = feats.first().map_or(0, Vec::len);
        Self {
            features: Standardizer::fit(feats.iter().map(Vec::as_slice), width),
            history: Standardizer::fit(hist.iter().map(|r| r.as_slice()), 2),
        }
    }
}

/// Per-sample network input for `instance`.
pub fn encode(kind: ModelKind, instance: &Instance, scaler: Option<&InputScaler>) -> Result<NetInput> {
    let scaled = |mut v: Vec<f64>, s: Option<&Standardizer>| {
        if let Some(s) = s {
            s.apply(&mut v);
        }
        v
    };
    let feats = || scaled(instance.features(), scaler.map(|s| &s.features));
    let d = instance.feature_len();
    let input = match kind {
        ModelKind::Mlp => NetInput::Single(Tensor::vector(feats())),
        ModelKind::Lstm => NetInput::Single(Tensor::new(vec![d, 1], feats())?),
        ModelKind::Cnn => NetInput::Single(Tensor::new(vec![1, d], feats())?),
        ModelKind::Trenet => {
            let w = instance.local_points.len();
            let mut local = instance.local_points.clone();
            if let Some(s) = scaler {
                // The window occupies the leading feature columns.
                for (i, v) in local.iter_mut().enumerate() {
                    *v = (*v - s.features.mean[i]) / s.features.scale[i];
                }
            }
            let hist: Vec<f64> = instance
                .trend_history
                .iter()
                .flat_map(|t| [t.slope, t.duration as f64])
                .collect();
            NetInput::Pair {
                local: Tensor::new(vec![1, w], local)?,
                history: Tensor::new(
                    vec![instance.trend_history.len(), 2],
                    scaled(hist, scaler.map(|s| &s.history)),
                )?,
            }
        }
        other => {
            return Err(Error::InvalidSpec(format!("{other} has no network input")))
        }
    };
    Ok(input)
}

/// Samples per gradient chunk: fixed by the batch size alone so the
/// summation order never depends on the thread count.
fn chunk_len(batch: usize) -> usize {
    batch.div_ceil(64).max(1)
}

fn sum_grads(acc: &mut Option<Vec<Tensor>>, grads: Vec<Tensor>) {
    match acc {
        None => *acc = Some(grads),
        Some(a) => a.iter_mut().zip(&grads).for_each(|(x, g)| x.add_assign(g)),
    }
}

/// Run `epochs` epochs of shuffled mini-batch Adam on the joint loss plus
/// L2 weight decay. Returns the mean training loss of each epoch.
pub fn train_network(
    network: &mut Network,
    inputs: &[NetInput],
    targets: &[[f64; 2]],
    cfg: &TrainConfig,
    epochs: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    let n = inputs.len();
    let batch = cfg.batch_size.clamp(1, n);
    let decay_flags = network.weight_flags();
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut trace = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..epochs {
        let epoch_seed = seed.derive(epoch as u64);
        order.shuffle(&mut epoch_seed.rng());
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(batch).enumerate() {
            let batch_seed = epoch_seed.derive(b as u64 + 1);
            let net = &*network;
            let partials: Vec<(f64, Vec<Tensor>)> = idx
                .par_chunks(chunk_len(idx.len()))
                .enumerate()
                .map(|(c, chunk)| {
                    let mut loss = 0.0;
                    let mut acc = None;
                    for (j, &i) in chunk.iter().enumerate() {
                        let sample_seed = batch_seed.derive((c * chunk.len() + j) as u64);
                        let (y, cache) = net.forward_seeded(&inputs[i], true, sample_seed)?;
                        let pred = [y.data()[0], y.data()[1]];
                        let (l, g) = joint_loss(&[pred], &[targets[i]])?;
                        loss += l;
                        let scale = 1.0 / idx.len() as f64;
                        let grad_out = Tensor::vector(vec![g[0][0] * scale, g[0][1] * scale]);
                        sum_grads(&mut acc, net.backward(&cache, &grad_out)?.params);
                    }
                    Ok((loss, acc.expect("nonempty chunk")))
                })
                .collect::<Result<_>>()?;

            let mut grads = None;
            for (l, g) in partials {
                epoch_loss += l;
                sum_grads(&mut grads, g);
            }
            let mut grads = grads.expect("nonempty batch");
            if cfg.weight_decay > 0.0 {
                for ((g, p), is_weight) in grads.iter_mut().zip(network.params()).zip(&decay_flags) {
                    if *is_weight {
                        g.data_mut()
                            .iter_mut()
                            .zip(p.data())
                            .for_each(|(gv, pv)| *gv += cfg.weight_decay * pv);
                    }
                }
            }
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut network.params_mut(), &grads)?;
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || network.params().iter().any(|p| !p.all_finite()) {
            return Err(Error::Divergence { epoch });
        }
        trace.push(mean);
    }
    Ok(trace)
}

fn targets_of(instances: &[Instance]) -> Vec<[f64; 2]> {
    instances.iter().map(Instance::target_pair).collect()
}

/// Train `network` on unscaled `instances` for `spec.train.epochs` epochs.
pub fn fit_network(
    network: &Network,
    instances: &[Instance],
    spec: &ModelSpec,
    seed: Seed,
) -> Result<(Network, Vec<f64>)> {
    fit_network_epochs(network, instances, spec, spec.train.epochs, None, seed)
}

pub(crate) fn fit_network_epochs(
    network: &Network,
    instances: &[Instance],
    spec: &ModelSpec,
    epochs: usize,
    scaler: Option<&InputScaler>,
    seed: Seed,
) -> Result<(Network, Vec<f64>)> {
    if instances.is_empty() {
        return Err(Error::EmptyInput);
    }
    let inputs = instances
        .iter()
        .map(|i| encode(spec.kind(), i, scaler))
        .collect::<Result<Vec<_>>>()?;
    let mut net = network.clone();
    let trace = train_network(&mut net, &inputs, &targets_of(instances), &spec.train, epochs, seed)?;
    Ok((net, trace))
}

/// Epochs of one warm-started update: `ceil(fraction * epochs)`.
pub fn warm_start_epochs(epochs: usize, fraction: f64) -> usize {
    // Guard against 0.1 * 30 = 3.0000000000000004 rounding up to 4.
    let exact = fraction * epochs as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() <= 1e-9 * exact.max(1.0) {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}

/// Continue training `previous` for `ceil(warm_start * epochs)` epochs.
pub fn warm_start_network(
    previous: &Network,
    instances: &[Instance],
    spec: &ModelSpec,
    seed: Seed,
) -> Result<(Network, Vec<f64>)> {
    let dims = instances.first().map(InputDims::of).ok_or(Error::EmptyInput)?;
    let template = build_network(spec, dims, seed)?;
    if !template.same_architecture(previous) {
        return Err(Error::ArchitectureMismatch(format!(
            "previous network does not match the {} spec",
            spec.kind()
        )));
    }
    let epochs = warm_start_epochs(spec.train.epochs, spec.train.warm_start);
    fit_network_epochs(previous, instances, spec, epochs, None, seed)
}

/// Forward pass with dropout disabled.
pub fn predict_network(network: &Network, input: &NetInput) -> Result<Prediction> {
    let (y, _) = network.forward_seeded(input, false, Seed(0))?;
    Ok(Prediction {
        slope: y.data()[0],
        duration: y.data()[1],
    })
}
