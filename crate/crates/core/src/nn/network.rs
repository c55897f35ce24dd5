use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::Seed;
use super::layers::{Layer, LayerCache, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A chain of layers applied to one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sequential {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    #[serde(skip)]
    generation: u64,
}

impl PartialEq for Sequential {
    fn eq(&self, other: &Self) -> bool {
        self.specs == other.specs
            && self.layers == other.layers
            && self.input_shape == other.input_shape
            && self.output_shape == other.output_shape
    }
}

/// Saved activations of one [`Sequential::forward`] call.
#[derive(Debug, Clone)]
pub struct SequentialCache {
    generation: u64,
    layers: Vec<LayerCache>,
}

impl Sequential {
    /// He-initialise every parametrised layer, layer `i` from
    /// `seed.derive(i)`. An lstm feeding a later lstm emits its full
    /// sequence.
    pub fn build(specs: &[LayerSpec], input_shape: &[usize], seed: Seed) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let feeds_lstm = specs[i + 1..]
                .iter()
                .any(|s| matches!(s, LayerSpec::Lstm { .. }));
            let (layer, out) = Layer::build(spec, i, &shape, feeds_lstm, seed.derive(i as u64))?;
            layers.push(layer);
            shape = out;
        }
        Ok(Self {
            specs: specs.to_vec(),
            layers,
            input_shape: input_shape.to_vec(),
            output_shape: shape,
            generation: 0,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    /// Mutable parameters. Invalidates caches from earlier forward passes.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.generation += 1;
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn weight_flags(&self) -> Vec<bool> {
        self.layers.iter().flat_map(Layer::weight_flags).collect()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        train: bool,
        rng: &mut R,
    ) -> Result<(Tensor, SequentialCache)> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                kind: self.layers.first().map_or("input", Layer::kind),
                detail: format!(
                    "network expects input {:?}, got {:?}",
                    self.input_shape,
                    input.shape()
                ),
            });
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache) = layer.forward(i, &x, train, rng)?;
            caches.push(cache);
            x = y;
        }
        Ok((
            x,
            SequentialCache {
                generation: self.generation,
                layers: caches,
            },
        ))
    }

    /// Input gradient and parameter gradients in [`Sequential::params`] order.
    pub fn backward(&self, cache: &SequentialCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if cache.generation != self.generation || cache.layers.len() != self.layers.len() {
            return Err(Error::StaleCache(
                "cache does not come from this network's current parameters".into(),
            ));
        }
        let mut g = grad_out.clone();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (i, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let (dx, grads) = layer.backward(i, lc, &g)?;
            per_layer.push(grads);
            g = dx;
        }
        per_layer.reverse();
        let g = g.reshaped(self.input_shape.clone())?;
        Ok((g, per_layer.into_iter().flatten().collect()))
    }
}

/// Hybrid network: a convolutional branch over the raw window and a
/// recurrent branch over the trend history, each projected to the fusion
/// width, summed elementwise, then dropout and a dense(2) output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreNet {
    pub(crate) local: Sequential,
    pub(crate) history: Sequential,
    pub(crate) head: Sequential,
}

impl TreNet {
    /// `window` raw points, `history_len` trends of (slope, duration).
    pub fn build(
        window: usize,
        history_len: usize,
        filters: [usize; 2],
        kernel: usize,
        lstm_cells: usize,
        fusion: usize,
        dropout: f64,
        seed: Seed,
    ) -> Result<Self> {
        let local = Sequential::build(
            &[
                LayerSpec::Conv1d {
                    filters: filters[0],
                    kernel,
                },
                LayerSpec::Conv1d {
                    filters: filters[1],
                    kernel,
                },
                LayerSpec::Relu,
                LayerSpec::Dense { out_dim: fusion },
            ],
            &[1, window],
            seed.derive(0),
        )?;
        let history = Sequential::build(
            &[
                LayerSpec::Lstm { cells: lstm_cells },
                LayerSpec::Dense { out_dim: fusion },
            ],
            &[history_len, 2],
            seed.derive(1),
        )?;
        let head = Sequential::build(
            &[LayerSpec::Dropout { p: dropout }, LayerSpec::Dense { out_dim: 2 }],
            &[fusion],
            seed.derive(2),
        )?;
        Ok(Self {
            local,
            history,
            head,
        })
    }

    pub fn local_branch(&self) -> &Sequential {
        &self.local
    }

    pub fn history_branch(&self) -> &Sequential {
        &self.history
    }

    pub fn head(&self) -> &Sequential {
        &self.head
    }

    /// Mutable access to the trend-history branch.
    pub fn history_branch_mut(&mut self) -> &mut Sequential {
        &mut self.history
    }
}

/// Per-sample network input.
#[derive(Debug, Clone, PartialEq)]
pub enum NetInput {
    Single(Tensor),
    Pair { local: Tensor, history: Tensor },
}

impl NetInput {
    fn tensors(&self) -> Vec<&Tensor> {
        match self {
            NetInput::Single(t) => vec![t],
            NetInput::Pair { local, history } => vec![local, history],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            NetInput::Single(t) => vec![t],
            NetInput::Pair { local, history } => vec![local, history],
        }
    }

    pub fn flat_len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub enum NetCache {
    Single(SequentialCache),
    Pair {
        local: SequentialCache,
        history: SequentialCache,
        head: SequentialCache,
    },
}

/// Gradients of one backward pass.
#[derive(Debug, Clone)]
pub struct NetGrads {
    /// Aligned with [`Network::params`].
    pub params: Vec<Tensor>,
    pub input: NetInput,
}

/// Any trainable network in the model zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Network {
    Sequential(Sequential),
    TreNet(TreNet),
}

impl Network {
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Network::Sequential(s) => s.params(),
            Network::TreNet(t) => {
                let mut p = t.local.params();
                p.extend(t.history.params());
                p.extend(t.head.params());
                p
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Network::Sequential(s) => s.params_mut(),
            Network::TreNet(t) => {
                let mut p = t.local.params_mut();
                p.extend(t.history.params_mut());
                p.extend(t.head.params_mut());
                p
            }
        }
    }

    pub fn weight_flags(&self) -> Vec<bool> {
        match self {
            Network::Sequential(s) => s.weight_flags(),
            Network::TreNet(t) => {
                let mut f = t.local.weight_flags();
                f.extend(t.history.weight_flags());
                f.extend(t.head.weight_flags());
                f
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &NetInput,
        train: bool,
        rng: &mut R,
    ) -> Result<(Tensor, NetCache)> {
        match (self, input) {
            (Network::Sequential(s), NetInput::Single(x)) => {
                let (y, c) = s.forward(x, train, rng)?;
                Ok((y, NetCache::Single(c)))
            }
            (Network::TreNet(t), NetInput::Pair { local, history }) => {
                let (a, lc) = t.local.forward(local, train, rng)?;
                let (b, hc) = t.history.forward(history, train, rng)?;
                let mut fused = a;
                fused.add_assign(&b);
                let (y, headc) = t.head.forward(&fused, train, rng)?;
                Ok((
                    y,
                    NetCache::Pair {
                        local: lc,
                        history: hc,
                        head: headc,
                    },
                ))
            }
            _ => Err(Error::ArchitectureMismatch(
                "input kind does not match the network".into(),
            )),
        }
    }

    /// Forward pass drawing dropout masks from `seed`.
    pub fn forward_seeded(&self, input: &NetInput, train: bool, seed: Seed) -> Result<(Tensor, NetCache)> {
        self.forward(input, train, &mut seed.rng())
    }

    pub fn backward(&self, cache: &NetCache, grad_out: &Tensor) -> Result<NetGrads> {
        match (self, cache) {
            (Network::Sequential(s), NetCache::Single(c)) => {
                let (dx, params) = s.backward(c, grad_out)?;
                Ok(NetGrads {
                    params,
                    input: NetInput::Single(dx),
                })
            }
            (
                Network::TreNet(t),
                NetCache::Pair {
                    local,
                    history,
                    head,
                },
            ) => {
                let (dfused, mut params) = t.head.backward(head, grad_out)?;
                let (dlocal, lp) = t.local.backward(local, &dfused)?;
                let (dhist, hp) = t.history.backward(history, &dfused)?;
                let mut all = lp;
                all.extend(hp);
                all.append(&mut params);
                Ok(NetGrads {
                    params: all,
                    input: NetInput::Pair {
                        local: dlocal,
                        history: dhist,
                    },
                })
            }
            _ => Err(Error::StaleCache("cache kind does not match the network".into())),
        }
    }

    /// True when both networks have identical layer structure and
    /// parameter shapes.
    pub fn same_architecture(&self, other: &Network) -> bool {
        fn shapes(n: &Network) -> Vec<Vec<usize>> {
            n.params().iter().map(|t| t.shape().to_vec()).collect()
        }
        let specs = |n: &Network| -> Vec<LayerSpec> {
            match n {
                Network::Sequential(s) => s.specs.clone(),
                Network::TreNet(t) => {
                    let mut v = t.local.specs.clone();
                    v.extend(t.history.specs.clone());
                    v.extend(t.head.specs.clone());
                    v
                }
            }
        };
        std::mem::discriminant(self) == std::mem::discriminant(other)
            && specs(self) == specs(other)
            && shapes(self) == shapes(other)
    }
}
