//! Discrete Green's operators, incident fields, and the method-of-moments
//! forward solver that maps a permittivity contrast to receiver readings.
//!
//! The model is 2D transverse-magnetic scattering on a pulse-basis grid.
//! With contrast `xi = eps_r - 1` on the cells, the total field solves the
//! state equation `(I - G_D Diag(xi)) E_t = E_i`, the induced current is
//! `J = Diag(xi) E_t`, and receivers observe `E_s = G_S J`.

use num_complex::Complex64;

use crate::numerics::{bessel::BesselOrder, hankel1, CMatrix, LuFactors};
use crate::scenes::{rasterize, Scene};
use crate::system::{grid_centers, ring_positions, Grid, Rng, SystemConfig};
use crate::{Error, Result};

/// Discrete Green's operators for one grid and receiver layout.
#[derive(Debug, Clone)]
pub struct GreensOperators {
    /// Cell-to-cell operator, `M^2 x M^2`.
    pub g_d: CMatrix,
    /// Cell-to-receiver operator, `Nr x M^2`.
    pub g_s: CMatrix,
    /// Wavenumber the operators were built for, rad/m.
    pub k0: f64,
    /// Cell area, m².
    pub cell_area: f64,
    /// Radius of the equal-area disk used for the self term, meters.
    pub equiv_radius: f64,
}

/// Scattered-field measurements plus everything needed to invert them.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    /// Configuration the measurements were taken under.
    pub config: SystemConfig,
    /// Received scattered fields, `Nr x Nt`.
    pub e_s: CMatrix,
    /// Noise level that was actually applied to `e_s`.
    pub noise_level_applied: f64,
    /// Ground-truth relative permittivity at generation resolution,
    /// row-major, when the measurements are synthetic.
    pub ground_truth: Option<Vec<f64>>,
}

impl MeasurementSet {
    /// Checks internal consistency of dimensions and physical bounds.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.e_s.rows() != self.config.n_rx || self.e_s.cols() != self.config.n_tx {
            return Err(Error::Shape(format!(
                "scattered fields are {}x{} but config declares {} receivers and {} transmitters",
                self.e_s.rows(),
                self.e_s.cols(),
                self.config.n_rx,
                self.config.n_tx
            )));
        }
        if !(self.noise_level_applied >= 0.0) {
            return Err(Error::Domain(format!(
                "noise_level_applied must be non-negative, got {}",
                self.noise_level_applied
            )));
        }
        if let Some(truth) = &self.ground_truth {
            let g = self.config.grid_gen;
            if truth.len() != g * g {
                return Err(Error::Shape(format!(
                    "ground truth holds {} values, expected {}x{}",
                    truth.len(),
                    g,
                    g
                )));
            }
            if let Some(v) = truth.iter().find(|v| !(**v >= 1.0)) {
                return Err(Error::Domain(format!(
                    "ground truth contains permittivity {v} below 1"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the Green's operators for a grid and a set of receiver positions.
///
/// Off-diagonal cell coupling is `k0^2 A (i/4) H0(k0 d)` for center
/// distance `d`; the singular self term integrates the kernel analytically
/// over the equal-area disk of radius `a = sqrt(A/pi)`, giving
/// `(i pi k0 a / 2) H1(k0 a) - 1`. Receiver coupling uses the same kernel
/// at receiver-to-cell distances.
pub fn build_greens(
    config: &SystemConfig,
    grid: &Grid,
    rx_positions: &[[f64; 2]],
) -> Result<GreensOperators> {
    let k0 = config.wavenumber();
    let m = grid.m;
    let n = m * m;
    let area = grid.cell_area;
    let half = m as f64 * grid.cell_side / 2.0;

    for (q, r) in rx_positions.iter().enumerate() {
        if r[0].abs() <= half && r[1].abs() <= half {
            return Err(Error::Domain(format!(
                "receiver {q} at ({}, {}) lies inside the ROI square",
                r[0], r[1]
            )));
        }
    }

    let scale = Complex64::new(0.0, 0.25) * k0 * k0 * area;

    // On a uniform grid the center distance depends only on the index
    // offsets, so one kernel evaluation per (di, dj) pair covers all n^2
    // entries.
    let mut table = vec![Complex64::new(0.0, 0.0); n];
    for di in 0..m {
        for dj in 0..m {
            if di == 0 && dj == 0 {
                continue;
            }
            let d = grid.cell_side * ((di * di + dj * dj) as f64).sqrt();
            table[di * m + dj] = scale * hankel1(BesselOrder::Zero, k0 * d)?;
        }
    }

    let equiv_radius = (area / std::f64::consts::PI).sqrt();
    let self_term = Complex64::new(0.0, std::f64::consts::PI * k0 * equiv_radius / 2.0)
        * hankel1(BesselOrder::One, k0 * equiv_radius)?
        - 1.0;

    let mut g_d = CMatrix::zeros(n, n);
    for row in 0..n {
        let (ri, rj) = (row / m, row % m);
        let out = g_d.row_mut(row);
        for (col, slot) in out.iter_mut().enumerate() {
            if col == row {
                *slot = self_term;
            } else {
                let (ci, cj) = (col / m, col % m);
                let di = ri.abs_diff(ci);
                let dj = rj.abs_diff(cj);
                *slot = table[di * m + dj];
            }
        }
    }

    let mut g_s = CMatrix::zeros(rx_positions.len(), n);
    for (q, r) in rx_positions.iter().enumerate() {
        let out = g_s.row_mut(q);
        for (col, slot) in out.iter_mut().enumerate() {
            let c = grid.centers[col];
            let d = ((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)).sqrt();
            if d == 0.0 {
                return Err(Error::Domain(format!(
                    "receiver {q} coincides with grid cell {col}"
                )));
            }
            *slot = scale * hankel1(BesselOrder::Zero, k0 * d)?;
        }
    }

    Ok(GreensOperators {
        g_d,
        g_s,
        k0,
        cell_area: area,
        equiv_radius,
    })
}

/// Incident fields of unit-amplitude 2D line sources: entry `(p, t)` is
/// `(i/4) H0(k0 |points[p] - tx[t]|)`.
pub fn incident_fields(
    config: &SystemConfig,
    tx_positions: &[[f64; 2]],
    points: &[[f64; 2]],
) -> Result<CMatrix> {
    let k0 = config.wavenumber();
    let quarter_i = Complex64::new(0.0, 0.25);
    let mut out = CMatrix::zeros(points.len(), tx_positions.len());
    for (p, pt) in points.iter().enumerate() {
        let row = out.row_mut(p);
        for (t, tx) in tx_positions.iter().enumerate() {
            let d = ((pt[0] - tx[0]).powi(2) + (pt[1] - tx[1]).powi(2)).sqrt();
            if d == 0.0 {
                return Err(Error::Domain(format!(
                    "query point {p} coincides with transmitter {t}"
                )));
            }
            row[t] = quarter_i * hankel1(BesselOrder::Zero, k0 * d)?;
        }
    }
    Ok(out)
}

/// Solves the state equation for every transmitter column at once and
/// propagates to the receivers.
///
/// Returns `(e_t, j, e_s)`: total fields on the grid, induced currents, and
/// scattered fields at the receivers.
pub fn forward_solve(
    greens: &GreensOperators,
    xi: &[f64],
    e_i: &CMatrix,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let n = greens.g_d.rows();
    if xi.len() != n {
        return Err(Error::Shape(format!(
            "contrast vector of length {} against a {n}-cell grid",
            xi.len()
        )));
    }
    if e_i.rows() != n {
        return Err(Error::Shape(format!(
            "incident fields have {} rows, expected {n}",
            e_i.rows()
        )));
    }
    if let Some(bad) = xi.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!(
            "contrast must be non-negative (lossless dielectric), found {bad}"
        )));
    }

    // System matrix A = I - G_D Diag(xi), assembled directly in planar form
    // so the peak footprint stays at one interleaved plus one planar copy.
    let mut a_re = vec![0.0f64; n * n];
    let mut a_im = vec![0.0f64; n * n];
    for row in 0..n {
        let g_row = greens.g_d.row(row);
        let dst_re = &mut a_re[row * n..(row + 1) * n];
        let dst_im = &mut a_im[row * n..(row + 1) * n];
        for col in 0..n {
            let g = g_row[col];
            dst_re[col] = -g.re * xi[col];
            dst_im[col] = -g.im * xi[col];
        }
        dst_re[row] += 1.0;
    }

    let factors = LuFactors::factor_planar(n, a_re, a_im)?;
    let (mut bt_re, mut bt_im) = e_i.to_planar();
    factors.solve_planar(&mut bt_re, &mut bt_im, e_i.cols())?;
    let e_t = CMatrix::from_planar(n, e_i.cols(), &bt_re, &bt_im)?;

    let j = e_t.scale_rows_real(xi)?;
    let e_s = greens.g_s.matmul(&j)?;
    Ok((e_t, j, e_s))
}

/// Adds circular complex Gaussian noise scaled so that the expected noise
/// norm is `level` times the signal norm: each real component has standard
/// deviation `level * ||e_s||_F / sqrt(2 Nr Nt)`.
///
/// Entries are perturbed in row-major order, real part before imaginary,
/// so a fixed seed yields identical output.
pub fn add_noise(e_s: &CMatrix, level: f64, rng: &mut Rng) -> CMatrix {
    assert!(level >= 0.0, "noise level must be non-negative");
    if level == 0.0 {
        return e_s.clone();
    }
    let count = (e_s.rows() * e_s.cols()) as f64;
    let sigma = level * e_s.fro_norm() / (2.0 * count).sqrt();
    let mut out = e_s.clone();
    for v in out.data_mut() {
        let dr = sigma * rng.normal();
        let di = sigma * rng.normal();
        *v += Complex64::new(dr, di);
    }
    out
}

/// Simulates a full acquisition: rasterizes the scene on the generation
/// grid, forward-solves, samples the receivers, and applies noise.
///
/// The generation grid is deliberately finer than the inversion grid so
/// reconstruction never sees fields produced by its own discretization.
/// The rng is consumed only by the noise step.
pub fn simulate_measurements(
    scene: &Scene,
    config: &SystemConfig,
    rng: &mut Rng,
) -> Result<MeasurementSet> {
    config.validate()?;
    scene.validate(config.roi_side)?;

    let grid = grid_centers(config.grid_gen, config.roi_side);
    let truth = rasterize(scene, config.grid_gen, config.roi_side);
    let xi: Vec<f64> = truth.iter().map(|&e| e - 1.0).collect();

    let tx = ring_positions(config.n_tx, config.ring_radius, config.tx_phase);
    let rx = ring_positions(config.n_rx, config.ring_radius, config.rx_phase);

    let greens = build_greens(config, &grid, &rx)?;
    let e_i = incident_fields(config, &tx, &grid.centers)?;
    let (_e_t, _j, e_s) = forward_solve(&greens, &xi, &e_i)?;
    let noisy = add_noise(&e_s, config.noise_level, rng);

    Ok(MeasurementSet {
        config: config.clone(),
        e_s: noisy,
        noise_level_applied: config.noise_level,
        ground_truth: Some(truth),
    })
}
