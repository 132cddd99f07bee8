//! Inverse solvers: the coordinate-network training loop that couples the
//! permittivity and current networks through the discrete physics, plus
//! the non-iterative back-propagation baseline and flexible-resolution
//! rendering of a trained network.

use std::time::Instant;

use num_complex::Complex64;

use crate::inr::{
    adam_step, coord_scale_ring, coord_scale_roi, encode_into, init_params, mlp_backward,
    mlp_forward, permittivity_head, permittivity_head_grad, AdamState, InrCheckpoint, MlpArch,
    MlpParams,
};
use crate::numerics::CMatrix;
use crate::physics::{build_greens, incident_fields, GreensOperators, MeasurementSet};
use crate::system::{grid_centers, jitter_samples, mix, ring_positions, streams, Grid, Rng, SystemConfig};
use crate::{Error, Result};

/// Loss values of one training iteration. `total` is the weighted sum of
/// the three raw components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub state: f64,
    pub tv: f64,
}

/// History and provenance of one training run.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// Loss values of every iteration, in order.
    pub history: Vec<LossBreakdown>,
    /// Wall-clock seconds of every iteration. Kept out of the persisted
    /// loss log so on-disk outputs stay byte-identical across runs.
    pub iter_seconds: Vec<f64>,
    /// Fingerprint of the final checkpoint, hex.
    pub checkpoint: String,
    /// Seed the run was started from.
    pub seed: u64,
}

/// How a permittivity map was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionSource {
    Bp,
    Inr,
}

/// A reconstructed relative-permittivity map on a square grid.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Row-major `resolution x resolution` values, all at least 1.
    pub eps_grid: Vec<f64>,
    pub resolution: usize,
    pub source: ReconstructionSource,
}

/// Scattered fields predicted from currents: `G_S * J_all`, all
/// transmitters in one product.
pub fn predict_scattered(j_all: &CMatrix, g_s: &CMatrix) -> Result<CMatrix> {
    g_s.matmul(j_all)
}

/// Currents implied by the state equation for contrast `xi` and the
/// current estimate `j_all`: `Diag(xi) (E_i + G_D J_all)`.
pub fn predict_current(
    xi: &[f64],
    e_i_all: &CMatrix,
    g_d: &CMatrix,
    j_all: &CMatrix,
) -> Result<CMatrix> {
    if let Some(bad) = xi.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!(
            "contrast must be non-negative, found {bad}"
        )));
    }
    g_d.matmul(j_all)?.add(e_i_all)?.scale_rows_real(xi)
}

/// Measurement misfit normalized by the measured power:
/// `|E_pred - E_meas|^2_F / |E_meas|^2_F`.
pub fn data_loss(e_s_pred: &CMatrix, e_s_meas: &CMatrix) -> Result<f64> {
    let denom = e_s_meas.fro_norm_sq();
    if denom == 0.0 {
        return Err(Error::Domain(
            "measured scattered field is identically zero; the normalized misfit is undefined"
                .into(),
        ));
    }
    Ok(e_s_pred.sub(e_s_meas)?.fro_norm_sq() / denom)
}

/// State-equation residual normalized by the Born-current power:
/// `|J_hat - J|^2_F / (|Diag(xi) E_i|^2_F + delta)`.
pub fn state_loss(
    j_hat: &CMatrix,
    j: &CMatrix,
    xi: &[f64],
    e_i_all: &CMatrix,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "denominator stabilizer must be positive, got {delta}"
        )));
    }
    if xi.len() != e_i_all.rows() {
        return Err(Error::Shape(format!(
            "contrast has {} entries but the incident field has {} rows",
            xi.len(),
            e_i_all.rows()
        )));
    }
    let num = j_hat.sub(j)?.fro_norm_sq();
    let mut denom = delta;
    for (n, &x) in xi.iter().enumerate() {
        let w: f64 = e_i_all.row(n).iter().map(|v| v.norm_sqr()).sum();
        denom += x * x * w;
    }
    Ok(num / denom)
}

/// Anisotropic total variation of a row-major `m x m` grid, averaged over
/// cells: `(1/m^2) sum |forward differences|` along both axes.
pub fn tv_loss(xi_grid: &[f64], m: usize) -> Result<f64> {
    if m < 2 || xi_grid.len() != m * m {
        return Err(Error::Shape(format!(
            "total variation needs an m x m grid with m >= 2, got {} values for m = {m}",
            xi_grid.len()
        )));
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            let v = xi_grid[i * m + j];
            if i + 1 < m {
                sum += (xi_grid[(i + 1) * m + j] - v).abs();
            }
            if j + 1 < m {
                sum += (xi_grid[i * m + j + 1] - v).abs();
            }
        }
    }
    Ok(sum / (m * m) as f64)
}

/// Sign with `sign(0) = 0`, the subgradient choice for `|x|` at the kink.
fn subgrad_sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Accumulates `weight * d(tv_loss)/d(xi)` into `out`.
fn tv_subgradient_acc(xi_grid: &[f64], m: usize, weight: f64, out: &mut [f64]) {
    let s = weight / (m * m) as f64;
    for i in 0..m {
        for j in 0..m {
            let n = i * m + j;
            if i + 1 < m {
                let g = s * subgrad_sign(xi_grid[(i + 1) * m + j] - xi_grid[n]);
                out[(i + 1) * m + j] += g;
                out[n] -= g;
            }
            if j + 1 < m {
                let g = s * subgrad_sign(xi_grid[i * m + j + 1] - xi_grid[n]);
                out[i * m + j + 1] += g;
                out[n] -= g;
            }
        }
    }
}

/// Everything the training loop shares across iterations: the inversion
/// grid, Green's operators and their adjoints, incident fields at the
/// fixed cell centers, and the encoded transmitter coordinates. Random
/// sampling only perturbs the coordinates fed to the networks; the physics
/// matrices stay fixed.
pub struct TrainContext {
    config: SystemConfig,
    grid: Grid,
    greens: GreensOperators,
    g_s_adj: CMatrix,
    g_d_adj: CMatrix,
    e_i: CMatrix,
    /// Per-cell incident power summed over transmitters.
    w: Vec<f64>,
    e_s: CMatrix,
    meas_norm_sq: f64,
    /// Encoded transmitter coordinates, `n_tx` rows of `enc_dim` values.
    tx_enc: Vec<f64>,
    /// Encoding width of one 2D coordinate.
    enc_dim: usize,
    scale_roi: f64,
    /// Transmitter positions, for evaluating incident fields at jittered
    /// sample points.
    tx: Vec<[f64; 2]>,
    /// Ratio of the backpropagation current scale to the incident-field
    /// scale. The current network's raw outputs are multiplied by this and
    /// by the local incident field, so its natural O(1) range lands on the
    /// physical current scale. Factoring the incident field out of the
    /// head matters twice over: the network needs to learn only the smooth
    /// scattering modulation instead of the oscillatory carrier phase,
    /// which a small network cannot fit in budget, and a wrongly scaled
    /// initial current tips the self-normalized state loss into runaway
    /// contrast growth or collapse.
    current_scale: f64,
    f_arch: MlpArch,
    h_arch: MlpArch,
}

/// Parameter gradients of both networks for one evaluation.
pub struct NetworkGrads {
    pub f: Vec<f64>,
    pub h: Vec<f64>,
}

/// Rejects measurements taken with a different acquisition geometry than
/// the reconstruction expects. Hyperparameters are free to differ; the
/// physical setup is not.
fn ensure_same_geometry(mc: &SystemConfig, config: &SystemConfig) -> Result<()> {
    let same = mc.frequency == config.frequency
        && mc.roi_side == config.roi_side
        && mc.ring_radius == config.ring_radius
        && mc.n_tx == config.n_tx
        && mc.n_rx == config.n_rx
        && mc.tx_phase == config.tx_phase
        && mc.rx_phase == config.rx_phase;
    if !same {
        return Err(Error::Config(
            "measurement geometry (frequency, ROI, ring, antenna counts, phases) \
             does not match the reconstruction configuration"
                .into(),
        ));
    }
    Ok(())
}

impl TrainContext {
    /// Precomputes the grid-fixed quantities. The measurement geometry
    /// must match `config`; hyperparameters are free to differ.
    pub fn new(measurements: &MeasurementSet, config: &SystemConfig) -> Result<Self> {
        measurements.validate()?;
        config.validate()?;
        ensure_same_geometry(&measurements.config, config)?;
        let meas_norm_sq = measurements.e_s.fro_norm_sq();
        if meas_norm_sq == 0.0 {
            return Err(Error::Domain(
                "measured scattered field is identically zero; nothing to fit".into(),
            ));
        }

        let grid = grid_centers(config.grid_m, config.roi_side);
        let rx = ring_positions(config.n_rx, config.ring_radius, config.rx_phase);
        let tx = ring_positions(config.n_tx, config.ring_radius, config.tx_phase);
        let greens = build_greens(config, &grid, &rx)?;
        let e_i = incident_fields(config, &tx, &grid.centers)?;
        let w: Vec<f64> = (0..grid.centers.len())
            .map(|n| e_i.row(n).iter().map(|v| v.norm_sqr()).sum())
            .collect();

        // Reference current energy from the backpropagation estimate,
        // which is anchored to the measurement energy. Relative to the
        // incident-field energy it fixes the head scale so that O(1)
        // network outputs, the trained currents, and the state residual
        // all live on the same physical scale. The floor corresponds to
        // an RMS contrast of 0.01, below which the scene is
        // indistinguishable from background at typical noise levels.
        let (j_bp, _) = bp_currents(&greens, &measurements.e_s, &e_i)?;
        let w_total: f64 = w.iter().sum();
        let current_energy = j_bp.fro_norm_sq().max(1e-4 * w_total);
        let current_scale = (current_energy / w_total).sqrt();

        let enc_dim = 4 * config.omega;
        let scale_ring = coord_scale_ring(config.ring_radius);
        let mut tx_enc = vec![0.0; config.n_tx * enc_dim];
        for (p, pos) in tx.iter().enumerate() {
            encode_into(
                &[pos[0] * scale_ring, pos[1] * scale_ring],
                config.omega,
                &mut tx_enc[p * enc_dim..(p + 1) * enc_dim],
            );
        }

        let f_arch = MlpArch::new(enc_dim, config.hidden_width, config.mlp_depth, 1);
        let h_arch = MlpArch::new(2 * enc_dim, config.hidden_width, config.mlp_depth, 2);
        f_arch.validate()?;
        h_arch.validate()?;

        Ok(Self {
            g_s_adj: greens.g_s.conj_transpose(),
            g_d_adj: greens.g_d.conj_transpose(),
            config: config.clone(),
            grid,
            greens,
            e_i,
            w,
            e_s: measurements.e_s.clone(),
            meas_norm_sq,
            tx_enc,
            enc_dim,
            scale_roi: coord_scale_roi(config.roi_side),
            tx,
            current_scale,
            f_arch,
            h_arch,
        })
    }

    pub fn f_arch(&self) -> MlpArch {
        self.f_arch
    }

    pub fn h_arch(&self) -> MlpArch {
        self.h_arch
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Losses at the given sample positions without gradients.
    pub fn losses(
        &self,
        f: &MlpParams,
        h: &MlpParams,
        samples: &[[f64; 2]],
    ) -> Result<LossBreakdown> {
        self.evaluate(f, h, samples, false).map(|(l, _)| l)
    }

    /// Losses and parameter gradients of both networks.
    pub fn losses_and_grads(
        &self,
        f: &MlpParams,
        h: &MlpParams,
        samples: &[[f64; 2]],
    ) -> Result<(LossBreakdown, NetworkGrads)> {
        let (l, g) = self.evaluate(f, h, samples, true)?;
        Ok((l, g.expect("gradients requested")))
    }

    fn evaluate(
        &self,
        f: &MlpParams,
        h: &MlpParams,
        samples: &[[f64; 2]],
        want_grads: bool,
    ) -> Result<(LossBreakdown, Option<NetworkGrads>)> {
        let m2 = self.grid.centers.len();
        let nt = self.config.n_tx;
        let omega = self.config.omega;
        if samples.len() != m2 {
            return Err(Error::Shape(format!(
                "{} sample positions for a {m2}-cell grid",
                samples.len()
            )));
        }

        // Permittivity network at the samples.
        let enc = self.enc_dim;
        let mut f_batch = vec![0.0; m2 * enc];
        for (n, &[x, y]) in samples.iter().enumerate() {
            encode_into(
                &[x * self.scale_roi, y * self.scale_roi],
                omega,
                &mut f_batch[n * enc..(n + 1) * enc],
            );
        }
        let (f_raw, f_cache) = mlp_forward(f, &f_batch, m2)?;
        let xi: Vec<f64> = f_raw.iter().map(|&r| permittivity_head(r) - 1.0).collect();

        // Current network at (sample, transmitter) pairs; row p*m2 + n.
        let h_in = 2 * enc;
        let mut h_batch = vec![0.0; m2 * nt * h_in];
        for p in 0..nt {
            let te = &self.tx_enc[p * enc..(p + 1) * enc];
            for n in 0..m2 {
                let r = (p * m2 + n) * h_in;
                h_batch[r..r + enc].copy_from_slice(&f_batch[n * enc..(n + 1) * enc]);
                h_batch[r + enc..r + h_in].copy_from_slice(te);
            }
        }
        let (h_out, h_cache) = mlp_forward(h, &h_batch, m2 * nt)?;
        // The head multiplies the network output by the incident field at
        // the same sample points: the field carries the oscillatory phase
        // analytically, so the network represents only the smooth complex
        // scattering ratio.
        let e_i_s = incident_fields(&self.config, &self.tx, samples)?;
        let cs = self.current_scale;
        let mut j = CMatrix::zeros(m2, nt);
        {
            let jd = j.data_mut();
            let ed = e_i_s.data();
            for p in 0..nt {
                for n in 0..m2 {
                    let r = 2 * (p * m2 + n);
                    let s = Complex64::new(cs * h_out[r], cs * h_out[r + 1]);
                    jd[n * nt + p] = ed[n * nt + p] * s;
                }
            }
        }

        // Physics coupling and the three losses.
        let s_field = self.greens.g_d.matmul(&j)?.add(&self.e_i)?;
        let j_hat = s_field.scale_rows_real(&xi)?;
        let resid_data = self.greens.g_s.matmul(&j)?.sub(&self.e_s)?;
        let resid_state = j_hat.sub(&j)?;
        let l_data = resid_data.fro_norm_sq() / self.meas_norm_sq;
        let state_num = resid_state.fro_norm_sq();
        let state_den = xi
            .iter()
            .zip(&self.w)
            .map(|(x, w)| x * x * w)
            .sum::<f64>()
            + self.config.delta;
        let l_state = state_num / state_den;
        let l_tv = tv_loss(&xi, self.grid.m)?;

        let cfg = &self.config;
        let total = cfg.lambda_data * l_data + cfg.lambda_state * l_state + cfg.lambda_tv * l_tv;
        let losses = LossBreakdown {
            total,
            data: l_data,
            state: l_state,
            tv: l_tv,
        };
        if !total.is_finite() {
            return Err(Error::NonFinite {
                iteration: 0,
                detail: format!(
                    "loss is not finite (data {l_data}, state {l_state}, tv {l_tv})"
                ),
            });
        }
        if !want_grads {
            return Ok((losses, None));
        }

        // Reverse pass. Gradients of complex quantities follow the
        // convention dL = sum Re[conj(G_Z) dZ], so linear maps transpose
        // to their conjugate adjoints.
        let mut g_e = resid_data;
        g_e.scale(Complex64::new(2.0 * cfg.lambda_data / self.meas_norm_sq, 0.0));
        let mut g_j = self.g_s_adj.matmul(&g_e)?;

        let mut g_j_hat = resid_state;
        g_j_hat.scale(Complex64::new(2.0 * cfg.lambda_state / state_den, 0.0));
        g_j = g_j.sub(&g_j_hat)?;
        let g_s_field = g_j_hat.scale_rows_real(&xi)?;
        g_j = g_j.add(&self.g_d_adj.matmul(&g_s_field)?)?;

        // Contrast gradient: through Diag(xi), through the state-loss
        // denominator, and through total variation.
        let den_coef = cfg.lambda_state * state_num / (state_den * state_den);
        let mut g_xi = vec![0.0; m2];
        for n in 0..m2 {
            let gr = g_j_hat.row(n);
            let sr = s_field.row(n);
            let mut acc = 0.0;
            for p in 0..nt {
                acc += gr[p].re * sr[p].re + gr[p].im * sr[p].im;
            }
            g_xi[n] = acc - den_coef * 2.0 * xi[n] * self.w[n];
        }
        if cfg.lambda_tv != 0.0 {
            tv_subgradient_acc(&xi, self.grid.m, cfg.lambda_tv, &mut g_xi);
        }

        let f_out_grad: Vec<f64> = (0..m2)
            .map(|n| g_xi[n] * permittivity_head_grad(f_raw[n]))
            .collect();
        let grads_f = mlp_backward(f, &f_cache, &f_out_grad)?;

        let mut h_out_grad = vec![0.0; m2 * nt * 2];
        {
            let jd = g_j.data();
            let ed = e_i_s.data();
            for p in 0..nt {
                for n in 0..m2 {
                    let r = 2 * (p * m2 + n);
                    let u = jd[n * nt + p].conj() * ed[n * nt + p];
                    h_out_grad[r] = cs * u.re;
                    h_out_grad[r + 1] = -cs * u.im;
                }
            }
        }
        let grads_h = mlp_backward(h, &h_cache, &h_out_grad)?;

        Ok((losses, Some(NetworkGrads { f: grads_f, h: grads_h })))
    }
}

/// Short content hash of a checkpoint, for log provenance.
fn checkpoint_fingerprint(ckpt: &InrCheckpoint) -> u64 {
    let mut acc = 0x9E37_79B9_7F4A_7C15u64;
    let mut absorb = |bits: u64| acc = mix(acc ^ bits);
    absorb(ckpt.omega as u64);
    absorb(ckpt.roi_side.to_bits());
    absorb(ckpt.ring_radius.to_bits());
    for &v in ckpt.f_net.data() {
        absorb(v.to_bits());
    }
    if let Some(h) = &ckpt.h_net {
        for &v in h.data() {
            absorb(v.to_bits());
        }
    }
    acc
}

/// Stamps the training iteration onto non-finite failures raised inside
/// one step.
fn at_iteration(e: Error, it: usize) -> Error {
    match e {
        Error::NonFinite { detail, .. } => Error::NonFinite {
            iteration: it,
            detail,
        },
        other => other,
    }
}

/// Zeroes a network's output layer, so its initial output is exactly the
/// output bias regardless of the hidden layers' random weights. The
/// layer un-sticks after one step: its weight gradients are nonzero
/// because the hidden activations are.
fn zero_output_layer(params: &mut MlpParams, arch: MlpArch) {
    let (i, o) = arch.layer_dims(arch.depth - 1);
    let start = params.data().len() - (i * o + o);
    for v in &mut params.data_mut()[start..] {
        *v = 0.0;
    }
}

/// Trains both coordinate networks against the measurements.
///
/// Each iteration jitters one sample per cell, queries the permittivity
/// network at the samples and the current network at every
/// (sample, transmitter) pair, couples them through the fixed Green's
/// operators, and takes one Adam step on the weighted sum of the
/// measurement, state-equation, and total-variation losses. All
/// randomness derives from `seed`, so a repeated run reproduces the loss
/// history exactly.
pub fn train(
    measurements: &MeasurementSet,
    config: &SystemConfig,
    seed: u64,
) -> Result<(InrCheckpoint, TrainingReport)> {
    let ctx = TrainContext::new(measurements, config)?;
    let mut f = init_params(&mut Rng::with_stream(seed, streams::INIT_F), ctx.f_arch)?;
    let mut h = init_params(&mut Rng::with_stream(seed, streams::INIT_H), ctx.h_arch)?;

    // Both output layers start at zero, with one exception below, so the
    // first evaluation sees exactly zero induced currents and a uniform
    // background contrast. At that point the measurement and state losses
    // are exactly one, the total-variation loss is zero, and the state
    // term's two contrast forces (the residual tether and the shrinking
    // normalizer) cancel, so training departs from a balanced, scale-free
    // equilibrium: the first current step is the adjoint of the
    // measurement operator applied to the data, i.e. a backpropagation
    // image. Random output layers instead start the optimization at
    // whatever loss magnitudes their arbitrary output scales produce,
    // which reliably tips the self-normalized state term into either
    // runaway contrast growth or collapse.
    zero_output_layer(&mut f, ctx.f_arch);
    zero_output_layer(&mut h, ctx.h_arch);
    {
        // The exception: the permittivity output bias starts at
        // softplus^-1(0.05), a faint uniform contrast. Zero raw output
        // would mean softplus(0) = 0.69 everywhere, far above background;
        // scatterers occupy a minority of the region, so a near-background
        // prior is the right starting map.
        let last = f.data().len() - 1;
        f.data_mut()[last] = (0.05f64.exp() - 1.0).ln();
    }
    let mut sampler = Rng::with_stream(seed, streams::SAMPLING);
    let mut adam_f = AdamState::new(
        f.data().len(),
        config.lr0,
        config.lr_decay_target,
        config.iters,
    );
    let mut adam_h = AdamState::new(
        h.data().len(),
        config.lr0,
        config.lr_decay_target,
        config.iters,
    );

    let mut history = Vec::with_capacity(config.iters);
    let mut iter_seconds = Vec::with_capacity(config.iters);
    for it in 0..config.iters {
        let started = Instant::now();
        let samples = jitter_samples(&ctx.grid, config.sigma_sample, &mut sampler);
        let (losses, grads) = ctx
            .losses_and_grads(&f, &h, &samples)
            .map_err(|e| at_iteration(e, it))?;
        adam_step(f.data_mut(), &grads.f, &mut adam_f).map_err(|e| at_iteration(e, it))?;
        adam_step(h.data_mut(), &grads.h, &mut adam_h).map_err(|e| at_iteration(e, it))?;
        history.push(losses);
        iter_seconds.push(started.elapsed().as_secs_f64());
    }

    let checkpoint = InrCheckpoint {
        omega: config.omega,
        roi_side: config.roi_side,
        ring_radius: config.ring_radius,
        f_net: f,
        h_net: Some(h),
    };
    let report = TrainingReport {
        history,
        iter_seconds,
        checkpoint: format!("{:016x}", checkpoint_fingerprint(&checkpoint)),
        seed,
    };
    Ok((checkpoint, report))
}

/// Backpropagation current estimate and the total field it implies. Per
/// transmitter p the current is gamma_p * G_S^H e_p with
/// gamma_p = <G_S G_S^H e_p, e_p> / |G_S G_S^H e_p|^2; the numerator
/// equals |G_S^H e_p|^2.
fn bp_currents(
    greens: &GreensOperators,
    e_s: &CMatrix,
    e_i: &CMatrix,
) -> Result<(CMatrix, CMatrix)> {
    let b = greens.g_s.conj_transpose().matmul(e_s)?;
    let c = greens.g_s.matmul(&b)?;
    let (m2, nt) = (b.rows(), b.cols());
    let mut gamma = vec![0.0; nt];
    for p in 0..nt {
        let mut num = 0.0;
        let mut den = 0.0;
        for n in 0..m2 {
            num += b.at(n, p).norm_sqr();
        }
        for r in 0..c.rows() {
            den += c.at(r, p).norm_sqr();
        }
        gamma[p] = if den > 0.0 { num / den } else { 0.0 };
    }
    let j = CMatrix::from_fn(m2, nt, |n, p| b.at(n, p) * gamma[p]);
    let e_t = greens.g_d.matmul(&j)?.add(e_i)?;
    Ok((j, e_t))
}

/// Non-iterative baseline: back-propagate each received field onto the
/// grid with an analytically optimal step, estimate the total field from
/// those currents, and extract the contrast by per-cell least squares.
pub fn bp_reconstruct(
    measurements: &MeasurementSet,
    config: &SystemConfig,
) -> Result<Reconstruction> {
    measurements.validate()?;
    config.validate()?;
    ensure_same_geometry(&measurements.config, config)?;
    let m = config.grid_m;
    let m2 = m * m;
    if measurements.e_s.fro_norm_sq() == 0.0 {
        return Ok(Reconstruction {
            eps_grid: vec![1.0; m2],
            resolution: m,
            source: ReconstructionSource::Bp,
        });
    }

    let grid = grid_centers(m, config.roi_side);
    let rx = ring_positions(config.n_rx, config.ring_radius, config.rx_phase);
    let tx = ring_positions(config.n_tx, config.ring_radius, config.tx_phase);
    let greens = build_greens(config, &grid, &rx)?;
    let e_i = incident_fields(config, &tx, &grid.centers)?;

    let (j, e_t) = bp_currents(&greens, &measurements.e_s, &e_i)?;
    let nt = config.n_tx;
    let mut eps_grid = vec![1.0; m2];
    for n in 0..m2 {
        let jr = j.row(n);
        let er = e_t.row(n);
        let mut num = 0.0;
        let mut den = 0.0;
        for p in 0..nt {
            num += jr[p].re * er[p].re + jr[p].im * er[p].im;
            den += er[p].norm_sqr();
        }
        let xi = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
        eps_grid[n] = 1.0 + xi;
    }
    Ok(Reconstruction {
        eps_grid,
        resolution: m,
        source: ReconstructionSource::Bp,
    })
}

/// Samples a trained permittivity network at the centers of a square grid
/// of any resolution over its ROI.
pub fn render(checkpoint: &InrCheckpoint, resolution: usize) -> Result<Reconstruction> {
    if resolution < 2 {
        return Err(Error::Config(format!(
            "render resolution must be at least 2, got {resolution}"
        )));
    }
    let arch = *checkpoint.f_net.arch();
    let omega = checkpoint.omega;
    if arch.input_dim != 4 * omega {
        return Err(Error::Shape(format!(
            "checkpoint encodes {omega} bands but the network expects input width {}",
            arch.input_dim
        )));
    }
    let grid = grid_centers(resolution, checkpoint.roi_side);
    let scale = coord_scale_roi(checkpoint.roi_side);
    let n = grid.centers.len();
    let mut batch = vec![0.0; n * arch.input_dim];
    for (k, &[x, y]) in grid.centers.iter().enumerate() {
        encode_into(
            &[x * scale, y * scale],
            omega,
            &mut batch[k * arch.input_dim..(k + 1) * arch.input_dim],
        );
    }
    let (raw, _) = mlp_forward(&checkpoint.f_net, &batch, n)?;
    Ok(Reconstruction {
        eps_grid: raw.iter().map(|&r| permittivity_head(r)).collect(),
        resolution,
        source: ReconstructionSource::Inr,
    })
}
