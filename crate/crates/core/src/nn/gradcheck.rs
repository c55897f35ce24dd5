//! Central finite-difference check of [`Network::backward`].

use rand::Rng;

use super::init::Seed;
use super::network::{NetInput, Network};
use super::tensor::Tensor;
use crate::error::Result;

pub const STEP: f64 = 1e-6;

/// Largest relative errors found by a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub params: f64,
    pub input: f64,
    pub checked: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Scalar probe loss `sum_i r_i * y_i` with fixed random weights `r`.
fn probe_loss(net: &Network, input: &NetInput, weights: &[f64], train: bool, seed: Seed) -> Result<f64> {
    let (y, _) = net.forward_seeded(input, train, seed)?;
    Ok(y.data().iter().zip(weights).map(|(a, b)| a * b).sum())
}

/// Compare analytic and central-difference gradients of every parameter
/// and input entry. With `train` set, dropout runs with the masks drawn
/// from `seed` on every evaluation, so the masks stay fixed.
pub fn grad_check_report(network: &Network, input: &NetInput, seed: Seed, train: bool) -> Result<GradCheckReport> {
    let mask_seed = seed.derive(1);
    let (y, cache) = network.forward_seeded(input, train, mask_seed)?;
    let mut rng = seed.derive(0).rng();
    let weights: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grads = network.backward(&cache, &Tensor::new(y.shape().to_vec(), weights.clone())?)?;

    let mut net = network.clone();
    let mut worst_param = 0.0f64;
    let mut checked = 0;
    let n_params = net.params().len();
    for pi in 0..n_params {
        for k in 0..net.params()[pi].len() {
            let orig = net.params()[pi].data()[k];
            net.params_mut()[pi].data_mut()[k] = orig + STEP;
            let up = probe_loss(&net, input, &weights, train, mask_seed)?;
            net.params_mut()[pi].data_mut()[k] = orig - STEP;
            let down = probe_loss(&net, input, &weights, train, mask_seed)?;
            net.params_mut()[pi].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst_param = worst_param.max(relative_error(grads.params[pi].data()[k], numeric));
            checked += 1;
        }
    }

    let mut worst_input = 0.0f64;
    let mut x = input.clone();
    let analytic_inputs: Vec<Vec<f64>> = match &grads.input {
        NetInput::Single(t) => vec![t.data().to_vec()],
        NetInput::Pair { local, history } => vec![local.data().to_vec(), history.data().to_vec()],
    };
    for (ti, analytic) in analytic_inputs.iter().enumerate() {
        for k in 0..analytic.len() {
            let orig = x.tensors_mut()[ti].data()[k];
            x.tensors_mut()[ti].data_mut()[k] = orig + STEP;
            let up = probe_loss(network, &x, &weights, train, mask_seed)?;
            x.tensors_mut()[ti].data_mut()[k] = orig - STEP;
            let down = probe_loss(network, &x, &weights, train, mask_seed)?;
            x.tensors_mut()[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst_input = worst_input.max(relative_error(analytic[k], numeric));
            checked += 1;
        }
    }

    Ok(GradCheckReport {
        params: worst_param,
        input: worst_input,
        checked,
    })
}

/// Maximum relative error over all parameters, dropout disabled.
pub fn grad_check(network: &Network, input: &NetInput, seed: Seed) -> Result<f64> {
    Ok(grad_check_report(network, input, seed, false)?.params)
}
