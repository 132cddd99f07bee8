//! Coordinate networks: positional encoding, multilayer perceptrons with
//! exact reverse-mode gradients, the permittivity output head, and Adam.
//!
//! Two networks share this machinery. One maps a spatial coordinate to the
//! relative permittivity at that point; the other maps a (point, transmitter)
//! coordinate pair to the complex induced current there. Both consume
//! positionally encoded inputs and train under the physics-coupled losses
//! of the inversion module.

pub(crate) mod dense;

use serde::{Deserialize, Serialize};

use crate::system::Rng;
use crate::{Error, Result};

/// Shape of one multilayer perceptron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    /// Width of the encoded input.
    pub input_dim: usize,
    /// Width of every hidden layer.
    pub hidden_width: usize,
    /// Total number of affine layers, including the output layer.
    pub depth: usize,
    /// Output channels: 1 for a real scalar field, 2 for a complex one.
    pub output_dim: usize,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden_width: usize, depth: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_width,
            depth,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!(
                "network depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.input_dim < 1 || self.hidden_width < 1 || self.output_dim < 1 {
            return Err(Error::Config(format!(
                "network widths must be at least 1, got {}/{}/{}",
                self.input_dim, self.hidden_width, self.output_dim
            )));
        }
        Ok(())
    }

    /// Input and output width of affine layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let input = if l == 0 { self.input_dim } else { self.hidden_width };
        let output = if l + 1 == self.depth {
            self.output_dim
        } else {
            self.hidden_width
        };
        (input, output)
    }

    /// Length of the flattened parameter vector.
    pub fn param_len(&self) -> usize {
        (0..self.depth)
            .map(|l| {
                let (i, o) = self.layer_dims(l);
                i * o + o
            })
            .sum()
    }

    /// Offset of layer `l`'s weight block in the flat vector.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| {
                let (i, o) = self.layer_dims(k);
                i * o + o
            })
            .sum()
    }
}

/// Flattened parameters of one network.
///
/// Layout, layer by layer from the input: the weight block stored
/// input-major (`w[i * out + o]` scales input `i` into output `o`, i.e. the
/// transpose of the conventional out-by-in matrix), then the bias vector.
/// The input-major order keeps the forward pass streaming over contiguous
/// rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: MlpArch,
    data: Vec<f64>,
}

impl MlpParams {
    /// Wraps an existing flat vector, checking its length.
    pub fn from_vec(arch: MlpArch, data: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if data.len() != arch.param_len() {
            return Err(Error::Shape(format!(
                "parameter vector of length {} does not fit the declared shape ({} expected)",
                data.len(),
                arch.param_len()
            )));
        }
        Ok(Self { arch, data })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Input-major weight block of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let (i, o) = self.arch.layer_dims(l);
        let start = self.arch.layer_offset(l);
        &self.data[start..start + i * o]
    }

    /// Bias vector of layer `l`.
    pub fn bias(&self, l: usize) -> &[f64] {
        let (i, o) = self.arch.layer_dims(l);
        let start = self.arch.layer_offset(l) + i * o;
        &self.data[start..start + o]
    }
}

/// Draws fresh parameters: weights uniform in
/// `(-sqrt(6/fan_in), +sqrt(6/fan_in))`, biases zero. Entries are drawn
/// layer by layer in storage order, so a fixed seed gives identical
/// parameters.
pub fn init_params(rng: &mut Rng, arch: MlpArch) -> Result<MlpParams> {
    arch.validate()?;
    let mut data = Vec::with_capacity(arch.param_len());
    for l in 0..arch.depth {
        let (fan_in, fan_out) = arch.layer_dims(l);
        let bound = (6.0 / fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            data.push(rng.uniform_in(-bound, bound));
        }
        data.extend(std::iter::repeat(0.0).take(fan_out));
    }
    MlpParams::from_vec(arch, data)
}

/// Positional encoding: for each input component `x_d` and each band
/// `k = 0..omega-1`, append `sin(2^k x_d), cos(2^k x_d)`. Components are
/// encoded one after another, all bands of a component together. Output
/// length is `2 * omega * dim`.
pub fn positional_encode(x: &[f64], omega: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * omega * x.len()];
    encode_into(x, omega, &mut out);
    out
}

/// In-place variant of [`positional_encode`] for hot loops.
pub fn encode_into(x: &[f64], omega: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * omega * x.len());
    let mut w = 0;
    for &v in x {
        let mut scaled = v;
        for _ in 0..omega {
            out[w] = scaled.sin();
            out[w + 1] = scaled.cos();
            w += 2;
            scaled *= 2.0;
        }
    }
}

/// Scale that maps ROI coordinates (meters) into `[-pi, pi]` per axis
/// before encoding.
pub fn coord_scale_roi(roi_side: f64) -> f64 {
    2.0 * std::f64::consts::PI / roi_side
}

/// Scale that maps antenna-ring coordinates (meters) into `[-pi, pi]`.
pub fn coord_scale_ring(ring_radius: f64) -> f64 {
    std::f64::consts::PI / ring_radius
}

/// Pre-activations retained by the forward pass for the backward pass.
#[derive(Debug)]
pub struct ForwardCache {
    n: usize,
    input: Vec<f64>,
    /// Pre-activation batch of every layer, in order.
    pre: Vec<Vec<f64>>,
}

/// Runs the network on a flat row-major batch of `n` encoded inputs.
/// Hidden layers apply ReLU; the final layer is affine. Returns the output
/// batch and the cache for [`mlp_backward`].
pub fn mlp_forward(
    params: &MlpParams,
    batch: &[f64],
    n: usize,
) -> Result<(Vec<f64>, ForwardCache)> {
    let arch = params.arch;
    if batch.len() != n * arch.input_dim {
        return Err(Error::Shape(format!(
            "batch of length {} is not {n} rows of width {}",
            batch.len(),
            arch.input_dim
        )));
    }

    let mut pre = Vec::with_capacity(arch.depth);
    let mut act = batch.to_vec();
    for l in 0..arch.depth {
        let (in_dim, out_dim) = arch.layer_dims(l);
        let mut z = vec![0.0; n * out_dim];
        dense::gemm(&mut z, false, &act, params.weights(l), n, in_dim, out_dim);
        dense::add_bias(&mut z, params.bias(l), n);
        if l + 1 < arch.depth {
            let mut next = vec![0.0; z.len()];
            dense::relu(&z, &mut next);
            act = next;
        } else {
            act = z.clone();
        }
        pre.push(z);
    }

    let cache = ForwardCache {
        n,
        input: batch.to_vec(),
        pre,
    };
    Ok((act, cache))
}

/// Reverse-mode gradients of the scalar loss whose output gradients are
/// supplied. Returns the flat parameter gradient in the [`MlpParams`]
/// layout; optionally also the gradient with respect to the encoded input
/// batch.
pub fn mlp_backward_full(
    params: &MlpParams,
    cache: &ForwardCache,
    out_grads: &[f64],
    want_input_grads: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let arch = params.arch;
    if cache.pre.len() != arch.depth
        || cache.input.len() != cache.n * arch.input_dim
        || cache
            .pre
            .iter()
            .enumerate()
            .any(|(l, z)| z.len() != cache.n * arch.layer_dims(l).1)
    {
        return Err(Error::Shape(
            "forward cache does not match the network shape; it is stale or from another network"
                .into(),
        ));
    }
    if out_grads.len() != cache.n * arch.output_dim {
        return Err(Error::Shape(format!(
            "output gradient of length {} is not {} rows of width {}",
            out_grads.len(),
            cache.n,
            arch.output_dim
        )));
    }

    let n = cache.n;
    let mut grads = vec![0.0; arch.param_len()];
    // dz of the layer currently being processed.
    let mut dz = out_grads.to_vec();
    // Scratch for rebuilding activations and transposing weights.
    let mut act = Vec::new();
    let mut wt_t = Vec::new();

    for l in (0..arch.depth).rev() {
        let (in_dim, out_dim) = arch.layer_dims(l);
        let start = arch.layer_offset(l);

        // Activation feeding this layer: the encoded input for layer 0,
        // otherwise ReLU of the previous pre-activation.
        let below: &[f64] = if l == 0 {
            &cache.input
        } else {
            act.resize(cache.pre[l - 1].len(), 0.0);
            dense::relu(&cache.pre[l - 1], &mut act);
            &act
        };

        dense::rank1_acc(
            &mut grads[start..start + in_dim * out_dim],
            below,
            &dz,
            n,
            in_dim,
            out_dim,
        );
        dense::bias_grad(
            &mut grads[start + in_dim * out_dim..start + in_dim * out_dim + out_dim],
            &dz,
            n,
        );

        let need_below_grad = l > 0 || want_input_grads;
        if !need_below_grad {
            break;
        }
        // d(below) = dz * W, with W materialized from the input-major block.
        wt_t.resize(in_dim * out_dim, 0.0);
        dense::transpose(params.weights(l), in_dim, out_dim, &mut wt_t);
        let mut d_below = vec![0.0; n * in_dim];
        dense::gemm(&mut d_below, false, &dz, &wt_t, n, out_dim, in_dim);
        if l > 0 {
            dense::relu_backward(&cache.pre[l - 1], &mut d_below);
        }
        dz = d_below;
    }

    let input_grads = want_input_grads.then_some(dz);
    Ok((grads, input_grads))
}

/// Parameter gradients only; see [`mlp_backward_full`].
pub fn mlp_backward(params: &MlpParams, cache: &ForwardCache, out_grads: &[f64]) -> Result<Vec<f64>> {
    mlp_backward_full(params, cache, out_grads, false).map(|(g, _)| g)
}

/// Output head of the permittivity network: `eps = 1 + softplus(raw)`,
/// smooth and bounded below by the free-space value.
pub fn permittivity_head(raw: f64) -> f64 {
    1.0 + softplus(raw)
}

/// Derivative of [`permittivity_head`] with respect to the raw output.
pub fn permittivity_head_grad(raw: f64) -> f64 {
    sigmoid(raw)
}

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Adam optimizer state with the exponential learning-rate schedule
/// `lr(t) = lr0 * decay_target^(t / total_iters)`.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr0: f64,
    pub lr_decay_target: f64,
    pub total_iters: usize,
}

impl AdamState {
    pub fn new(param_len: usize, lr0: f64, lr_decay_target: f64, total_iters: usize) -> Self {
        Self {
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr0,
            lr_decay_target,
            total_iters,
        }
    }

    /// Steps completed so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Learning rate used at step `t` (1-based).
    pub fn lr_at(&self, t: u64) -> f64 {
        self.lr0
            * self
                .lr_decay_target
                .powf(t as f64 / self.total_iters as f64)
    }
}

/// One Adam update in place. Rejects non-finite gradients before touching
/// the parameters so a failed step leaves them intact.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam buffers disagree: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            iteration: state.t as usize,
            detail: format!("gradient entry {pos} is {}", grads[pos]),
        });
    }

    state.t += 1;
    let lr = state.lr_at(state.t);
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Trained pair of networks plus everything needed to evaluate them at new
/// coordinates: the encoding width and the normalization scales' inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InrCheckpoint {
    /// Positional-encoding bands used at training time.
    pub omega: usize,
    /// ROI side the coordinate normalization was built from, meters.
    pub roi_side: f64,
    /// Ring radius the transmitter normalization was built from, meters.
    pub ring_radius: f64,
    /// Permittivity network.
    pub f_net: MlpParams,
    /// Induced-current network, when retained.
    pub h_net: Option<MlpParams>,
}
