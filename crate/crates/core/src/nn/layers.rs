//! The fixed layer vocabulary and its exact forward/backward passes.
//!
//! Shapes, per sample:
//! - dense: any input, flattened; output `[out_dim]`
//! - conv1d: `[channels, length]` (a bare `[length]` is one channel);
//!   valid cross-correlation, stride 1; output `[filters, length - kernel + 1]`
//! - lstm: `[steps, features]` (a bare `[steps]` is one feature); output the
//!   final hidden state `[cells]`, or `[steps, cells]` when feeding another lstm
//! - maxpool: pools the last axis with stride equal to the window size
//! - relu, dropout, identity-pool: shape preserving

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{he_init, Seed};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense { out_dim: usize },
    Conv1d { filters: usize, kernel: usize },
    Lstm { cells: usize },
    Relu,
    Dropout { p: f64 },
    MaxPool { size: usize },
    IdentityPool,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::IdentityPool => "identity-pool",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSpec(format!("{}: {what}", self.name())));
        match *self {
            LayerSpec::Dense { out_dim: 0 } => bad("out_dim must be >= 1"),
            LayerSpec::Conv1d { filters, kernel } if filters == 0 || kernel == 0 => {
                bad("filters and kernel must be >= 1")
            }
            LayerSpec::Lstm { cells: 0 } => bad("cells must be >= 1"),
            LayerSpec::Dropout { p } if !(0.0..1.0).contains(&p) => bad("p must be in [0, 1)"),
            LayerSpec::MaxPool { size: 0 } => bad("pool size must be >= 1"),
            _ => Ok(()),
        }
    }
}

/// A layer with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layer {
    Dense {
        /// `[out, in]`
        weight: Tensor,
        bias: Tensor,
    },
    Conv1d {
        /// `[filters, channels, kernel]`
        weight: Tensor,
        bias: Tensor,
    },
    Lstm {
        /// `[4 * cells, features]`, gate blocks ordered input, forget, cell, output.
        w_input: Tensor,
        /// `[4 * cells, cells]`
        w_hidden: Tensor,
        bias: Tensor,
        return_sequences: bool,
    },
    Relu,
    Dropout {
        p: f64,
    },
    MaxPool {
        size: usize,
    },
    IdentityPool,
}

#[derive(Debug, Clone)]
pub struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Dense { input: Tensor },
    Conv1d { input: Tensor },
    Lstm { input: Tensor, steps: Vec<LstmStep> },
    Relu { input: Tensor },
    Dropout { mask: Option<Vec<f64>>, shape: Vec<usize> },
    MaxPool { argmax: Vec<usize>, input_shape: Vec<usize> },
    IdentityPool,
}

impl LayerCache {
    fn kind(&self) -> &'static str {
        match self {
            LayerCache::Dense { .. } => "dense",
            LayerCache::Conv1d { .. } => "conv1d",
            LayerCache::Lstm { .. } => "lstm",
            LayerCache::Relu { .. } => "relu",
            LayerCache::Dropout { .. } => "dropout",
            LayerCache::MaxPool { .. } => "maxpool",
            LayerCache::IdentityPool => "identity-pool",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `[channels, length]` view of a conv/pool input.
fn as_channels(shape: &[usize]) -> Option<(usize, usize)> {
    match *shape {
        [l] => Some((1, l)),
        [c, l] => Some((c, l)),
        _ => None,
    }
}

/// `[steps, features]` view of an lstm input.
fn as_sequence(shape: &[usize]) -> Option<(usize, usize)> {
    match *shape {
        [t] => Some((t, 1)),
        [t, d] => Some((t, d)),
        _ => None,
    }
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv1d { .. } => "conv1d",
            Layer::Lstm { .. } => "lstm",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::MaxPool { .. } => "maxpool",
            Layer::IdentityPool => "identity-pool",
        }
    }

    /// Instantiate `spec` for per-sample inputs of `input_shape`, returning
    /// the layer and its output shape.
    pub fn build(
        spec: &LayerSpec,
        index: usize,
        input_shape: &[usize],
        return_sequences: bool,
        seed: Seed,
    ) -> Result<(Layer, Vec<usize>)> {
        spec.validate()?;
        let mismatch = |detail: String| Error::ShapeMismatch {
            layer: index,
            kind: spec.name(),
            detail,
        };
        match *spec {
            LayerSpec::Dense { out_dim } => {
                let fan_in: usize = input_shape.iter().product();
                if fan_in == 0 {
                    return Err(mismatch(format!("empty input {input_shape:?}")));
                }
                let layer = Layer::Dense {
                    weight: he_init(&[out_dim, fan_in], fan_in, seed),
                    bias: Tensor::zeros(&[out_dim]),
                };
                Ok((layer, vec![out_dim]))
            }
            LayerSpec::Conv1d { filters, kernel } => {
                let (c, l) = as_channels(input_shape)
                    .ok_or_else(|| mismatch(format!("expected [channels, length], got {input_shape:?}")))?;
                if l < kernel || c == 0 {
                    return Err(mismatch(format!(
                        "kernel {kernel} does not fit input {input_shape:?}"
                    )));
                }
                let layer = Layer::Conv1d {
                    weight: he_init(&[filters, c, kernel], c * kernel, seed),
                    bias: Tensor::zeros(&[filters]),
                };
                Ok((layer, vec![filters, l - kernel + 1]))
            }
            LayerSpec::Lstm { cells } => {
                let (t, d) = as_sequence(input_shape)
                    .ok_or_else(|| mismatch(format!("expected [steps, features], got {input_shape:?}")))?;
                if t == 0 || d == 0 {
                    return Err(mismatch(format!("empty sequence {input_shape:?}")));
                }
                let layer = Layer::Lstm {
                    w_input: he_init(&[4 * cells, d], d, seed.derive(0)),
                    w_hidden: he_init(&[4 * cells, cells], cells, seed.derive(1)),
                    bias: Tensor::zeros(&[4 * cells]),
                    return_sequences,
                };
                let out = if return_sequences {
                    vec![t, cells]
                } else {
                    vec![cells]
                };
                Ok((layer, out))
            }
            LayerSpec::Relu => Ok((Layer::Relu, input_shape.to_vec())),
            LayerSpec::Dropout { p } => Ok((Layer::Dropout { p }, input_shape.to_vec())),
            LayerSpec::MaxPool { size } => {
                let last = *input_shape
                    .last()
                    .ok_or_else(|| mismatch("scalar input".into()))?;
                if last / size == 0 {
                    return Err(mismatch(format!(
                        "pool size {size} exceeds length {last}"
                    )));
                }
                let mut out = input_shape.to_vec();
                *out.last_mut().expect("nonempty") = last / size;
                Ok((Layer::MaxPool { size }, out))
            }
            LayerSpec::IdentityPool => Ok((Layer::IdentityPool, input_shape.to_vec())),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense { weight, bias } | Layer::Conv1d { weight, bias } => vec![weight, bias],
            Layer::Lstm {
                w_input,
                w_hidden,
                bias,
                ..
            } => vec![w_input, w_hidden, bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense { weight, bias } | Layer::Conv1d { weight, bias } => vec![weight, bias],
            Layer::Lstm {
                w_input,
                w_hidden,
                bias,
                ..
            } => vec![w_input, w_hidden, bias],
            _ => vec![],
        }
    }

    /// For each parameter tensor, whether it is a weight (subject to L2
    /// decay) rather than a bias.
    pub fn weight_flags(&self) -> Vec<bool> {
        match self {
            Layer::Dense { .. } | Layer::Conv1d { .. } => vec![true, false],
            Layer::Lstm { .. } => vec![true, true, false],
            _ => vec![],
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        index: usize,
        x: &Tensor,
        train: bool,
        rng: &mut R,
    ) -> Result<(Tensor, LayerCache)> {
        let mismatch = |detail: String| Error::ShapeMismatch {
            layer: index,
            kind: self.kind(),
            detail,
        };
        match self {
            Layer::Dense { weight, bias } => {
                let (out, inp) = (weight.shape()[0], weight.shape()[1]);
                if x.len() != inp {
                    return Err(mismatch(format!("expected {inp} inputs, got {:?}", x.shape())));
                }
                let w = weight.data();
                let xs = x.data();
                let y = (0..out)
                    .map(|o| {
                        let row = &w[o * inp..(o + 1) * inp];
                        bias.data()[o] + row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                Ok((Tensor::vector(y), LayerCache::Dense { input: x.clone() }))
            }
            Layer::Conv1d { weight, bias } => {
                let (f, c, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
                let (xc, l) = as_channels(x.shape())
                    .ok_or_else(|| mismatch(format!("expected [channels, length], got {:?}", x.shape())))?;
                if xc != c || l < k {
                    return Err(mismatch(format!(
                        "expected [{c}, >= {k}] input, got {:?}",
                        x.shape()
                    )));
                }
                let lo = l - k + 1;
                let (w, xs) = (weight.data(), x.data());
                let mut y = vec![0.0; f * lo];
                for fi in 0..f {
                    for t in 0..lo {
                        let mut acc = bias.data()[fi];
                        for ci in 0..c {
                            let wrow = &w[(fi * c + ci) * k..(fi * c + ci + 1) * k];
                            let xrow = &xs[ci * l + t..ci * l + t + k];
                            acc += wrow.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                        y[fi * lo + t] = acc;
                    }
                }
                let input = x.clone().reshaped(vec![c, l])?;
                Ok((Tensor::new(vec![f, lo], y)?, LayerCache::Conv1d { input }))
            }
            Layer::Lstm {
                w_input,
                w_hidden,
                bias,
                return_sequences,
            } => {
                let h = w_hidden.shape()[1];
                let d = w_input.shape()[1];
                let (t, xd) = as_sequence(x.shape())
                    .ok_or_else(|| mismatch(format!("expected [steps, features], got {:?}", x.shape())))?;
                if xd != d || t == 0 {
                    return Err(mismatch(format!(
                        "expected [steps, {d}] input, got {:?}",
                        x.shape()
                    )));
                }
                let (wx, wh, b) = (w_input.data(), w_hidden.data(), bias.data());
                let mut h_prev = vec![0.0; h];
                let mut c_prev = vec![0.0; h];
                let mut steps = Vec::with_capacity(t);
                let mut outputs = Vec::with_capacity(if *return_sequences { t * h } else { h });
                for s in 0..t {
                    let xt = &x.data()[s * d..(s + 1) * d];
                    let mut z = b.to_vec();
                    for (r, zr) in z.iter_mut().enumerate() {
                        *zr += wx[r * d..(r + 1) * d]
                            .iter()
                            .zip(xt)
                            .map(|(a, v)| a * v)
                            .sum::<f64>();
                        *zr += wh[r * h..(r + 1) * h]
                            .iter()
                            .zip(&h_prev)
                            .map(|(a, v)| a * v)
                            .sum::<f64>();
                    }
                    let i: Vec<f64> = z[..h].iter().map(|v| sigmoid(*v)).collect();
                    let f: Vec<f64> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
                    let g: Vec<f64> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
                    let o: Vec<f64> = z[3 * h..].iter().map(|v| sigmoid(*v)).collect();
                    let c: Vec<f64> = (0..h).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
                    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                    let hn: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
                    if *return_sequences {
                        outputs.extend_from_slice(&hn);
                    }
                    steps.push(LstmStep {
                        h_prev: std::mem::replace(&mut h_prev, hn),
                        c_prev: std::mem::replace(&mut c_prev, c),
                        i,
                        f,
                        g,
                        o,
                        tanh_c,
                    });
                }
                let y = if *return_sequences {
                    Tensor::new(vec![t, h], outputs)?
                } else {
                    Tensor::vector(h_prev)
                };
                let input = x.clone().reshaped(vec![t, d])?;
                Ok((y, LayerCache::Lstm { input, steps }))
            }
            Layer::Relu => {
                let mut y = x.clone();
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok((y, LayerCache::Relu { input: x.clone() }))
            }
            Layer::Dropout { p } => {
                if !train || *p == 0.0 {
                    return Ok((
                        x.clone(),
                        LayerCache::Dropout {
                            mask: None,
                            shape: x.shape().to_vec(),
                        },
                    ));
                }
                let keep = 1.0 / (1.0 - p);
                let mask: Vec<f64> = (0..x.len())
                    .map(|_| if rng.random::<f64>() < *p { 0.0 } else { keep })
                    .collect();
                let mut y = x.clone();
                y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                Ok((
                    y,
                    LayerCache::Dropout {
                        mask: Some(mask),
                        shape: x.shape().to_vec(),
                    },
                ))
            }
            Layer::MaxPool { size } => {
                let last = *x.shape().last().ok_or_else(|| mismatch("scalar input".into()))?;
                let lo = last / size;
                if lo == 0 {
                    return Err(mismatch(format!("pool size {size} exceeds length {last}")));
                }
                let rows = x.len() / last;
                let xs = x.data();
                let mut y = Vec::with_capacity(rows * lo);
                let mut argmax = Vec::with_capacity(rows * lo);
                for r in 0..rows {
                    for j in 0..lo {
                        let base = r * last + j * size;
                        let mut best = base;
                        for q in base + 1..base + size {
                            if xs[q] > xs[best] {
                                best = q;
                            }
                        }
                        y.push(xs[best]);
                        argmax.push(best);
                    }
                }
                let mut shape = x.shape().to_vec();
                *shape.last_mut().expect("nonempty") = lo;
                Ok((
                    Tensor::new(shape, y)?,
                    LayerCache::MaxPool {
                        argmax,
                        input_shape: x.shape().to_vec(),
                    },
                ))
            }
            Layer::IdentityPool => Ok((x.clone(), LayerCache::IdentityPool)),
        }
    }

    /// Gradient with respect to the layer input, and to each parameter in
    /// [`Layer::params`] order.
    pub fn backward(
        &self,
        index: usize,
        cache: &LayerCache,
        grad_out: &Tensor,
    ) -> Result<(Tensor, Vec<Tensor>)> {
        let stale = || {
            Error::StaleCache(format!(
                "layer {index} is {} but the cache holds {}",
                self.kind(),
                cache.kind()
            ))
        };
        match (self, cache) {
            (Layer::Dense { weight, .. }, LayerCache::Dense { input }) => {
                let (out, inp) = (weight.shape()[0], weight.shape()[1]);
                if grad_out.len() != out || input.len() != inp {
                    return Err(stale());
                }
                let (w, x, gy) = (weight.data(), input.data(), grad_out.data());
                let mut dw = vec![0.0; out * inp];
                let mut dx = vec![0.0; inp];
                for o in 0..out {
                    let g = gy[o];
                    let row = &w[o * inp..(o + 1) * inp];
                    for i in 0..inp {
                        dw[o * inp + i] = g * x[i];
                        dx[i] += row[i] * g;
                    }
                }
                Ok((
                    Tensor::new(input.shape().to_vec(), dx)?,
                    vec![Tensor::new(vec![out, inp], dw)?, Tensor::vector(gy.to_vec())],
                ))
            }
            (Layer::Conv1d { weight, .. }, LayerCache::Conv1d { input }) => {
                let (f, c, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
                let l = input.shape()[1];
                let lo = l + 1 - k;
                if grad_out.len() != f * lo || input.shape()[0] != c {
                    return Err(stale());
                }
                let (w, x, gy) = (weight.data(), input.data(), grad_out.data());
                let mut dw = vec![0.0; f * c * k];
                let mut db = vec![0.0; f];
                let mut dx = vec![0.0; c * l];
                for fi in 0..f {
                    for t in 0..lo {
                        let g = gy[fi * lo + t];
                        db[fi] += g;
                        for ci in 0..c {
                            for ki in 0..k {
                                let wi = (fi * c + ci) * k + ki;
                                let xi = ci * l + t + ki;
                                dw[wi] += g * x[xi];
                                dx[xi] += w[wi] * g;
                            }
                        }
                    }
                }
                Ok((
                    Tensor::new(vec![c, l], dx)?,
                    vec![Tensor::new(vec![f, c, k], dw)?, Tensor::vector(db)],
                ))
            }
            (
                Layer::Lstm {
                    w_input,
                    w_hidden,
                    return_sequences,
                    ..
                },
                LayerCache::Lstm { input, steps },
            ) => {
                let h = w_hidden.shape()[1];
                let d = w_input.shape()[1];
                let t = steps.len();
                let expected = if *return_sequences { t * h } else { h };
                if grad_out.len() != expected || input.shape() != [t, d] {
                    return Err(stale());
                }
                let (wx, wh, x, gy) = (w_input.data(), w_hidden.data(), input.data(), grad_out.data());
                let mut dwx = vec![0.0; 4 * h * d];
                let mut dwh = vec![0.0; 4 * h * h];
                let mut db = vec![0.0; 4 * h];
                let mut dx = vec![0.0; t * d];
                let mut dh_next = vec![0.0; h];
                let mut dc_next = vec![0.0; h];
                let mut dz = vec![0.0; 4 * h];
                for s in (0..t).rev() {
                    let st = &steps[s];
                    let mut dh = dh_next.clone();
                    if *return_sequences {
                        for j in 0..h {
                            dh[j] += gy[s * h + j];
                        }
                    } else if s == t - 1 {
                        for j in 0..h {
                            dh[j] += gy[j];
                        }
                    }
                    for j in 0..h {
                        let dc = dc_next[j] + dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]);
                        let do_ = dh[j] * st.tanh_c[j];
                        let di = dc * st.g[j];
                        let dg = dc * st.i[j];
                        let df = dc * st.c_prev[j];
                        dc_next[j] = dc * st.f[j];
                        dz[j] = di * st.i[j] * (1.0 - st.i[j]);
                        dz[h + j] = df * st.f[j] * (1.0 - st.f[j]);
                        dz[2 * h + j] = dg * (1.0 - st.g[j] * st.g[j]);
                        dz[3 * h + j] = do_ * st.o[j] * (1.0 - st.o[j]);
                    }
                    let xt = &x[s * d..(s + 1) * d];
                    dh_next.iter_mut().for_each(|v| *v = 0.0);
                    for (r, &g) in dz.iter().enumerate() {
                        db[r] += g;
                        for q in 0..d {
                            dwx[r * d + q] += g * xt[q];
                            dx[s * d + q] += wx[r * d + q] * g;
                        }
                        for q in 0..h {
                            dwh[r * h + q] += g * st.h_prev[q];
                            dh_next[q] += wh[r * h + q] * g;
                        }
                    }
                }
                Ok((
                    Tensor::new(vec![t, d], dx)?,
                    vec![
                        Tensor::new(vec![4 * h, d], dwx)?,
                        Tensor::new(vec![4 * h, h], dwh)?,
                        Tensor::vector(db),
                    ],
                ))
            }
            (Layer::Relu, LayerCache::Relu { input }) => {
                if grad_out.len() != input.len() {
                    return Err(stale());
                }
                let dx = input
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                Ok((Tensor::new(input.shape().to_vec(), dx)?, vec![]))
            }
            (Layer::Dropout { .. }, LayerCache::Dropout { mask, shape }) => {
                if grad_out.len() != shape.iter().product::<usize>() {
                    return Err(stale());
                }
                let mut dx = grad_out.clone().reshaped(shape.clone())?;
                if let Some(mask) = mask {
                    dx.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                }
                Ok((dx, vec![]))
            }
            (Layer::MaxPool { .. }, LayerCache::MaxPool { argmax, input_shape }) => {
                if grad_out.len() != argmax.len() {
                    return Err(stale());
                }
                let mut dx = Tensor::zeros(input_shape);
                for (g, &src) in grad_out.data().iter().zip(argmax) {
                    dx.data_mut()[src] += g;
                }
                Ok((dx, vec![]))
            }
            (Layer::IdentityPool, LayerCache::IdentityPool) => Ok((grad_out.clone(), vec![])),
            _ => Err(stale()),
        }
    }
}
