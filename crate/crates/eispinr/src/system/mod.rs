//! Measurement geometry, discretization, hyperparameters, and the random
//! spatial-sampling scheme.
//!
//! A [`SystemConfig`] is the single validated record that every stage of
//! the pipeline reads: antenna ring layout, operating frequency, the two
//! grid resolutions (fine for simulation, coarse for inversion), and all
//! training hyperparameters. [`Grid`] carries the cell centers that both
//! the forward solver and the coordinate networks sample.

pub mod rng;

pub use rng::{streams, Rng};
pub(crate) use rng::mix;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Full experiment description: geometry, discretization, and training
/// hyperparameters in one validated, serializable record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Operating frequency in Hz.
    pub frequency: f64,
    /// Side length of the square region of interest, meters.
    pub roi_side: f64,
    /// Inversion grid resolution per side (M).
    pub grid_m: usize,
    /// Generation grid resolution per side, used by the forward simulation.
    pub grid_gen: usize,
    /// Number of transmitters on the ring.
    pub n_tx: usize,
    /// Number of receivers on the ring.
    pub n_rx: usize,
    /// Radius of the antenna ring, meters, centered on the ROI.
    pub ring_radius: f64,
    /// Angular offset of the first transmitter, radians.
    pub tx_phase: f64,
    /// Angular offset of the first receiver, radians.
    pub rx_phase: f64,
    /// Additive noise level as a fraction of the measurement norm.
    pub noise_level: f64,
    /// Master seed; stages derive independent streams from it.
    pub seed: u64,
    /// Number of positional-encoding frequency bands.
    pub omega: usize,
    /// Standard deviation of the per-cell sample jitter, meters.
    pub sigma_sample: f64,
    /// Hidden width of both coordinate networks.
    pub hidden_width: usize,
    /// Number of affine layers in both coordinate networks.
    pub mlp_depth: usize,
    /// Weight of the measurement-fit loss term.
    pub lambda_data: f64,
    /// Weight of the field-consistency loss term.
    pub lambda_state: f64,
    /// Weight of the total-variation regularizer.
    pub lambda_tv: f64,
    /// Initial Adam learning rate.
    pub lr0: f64,
    /// Fraction of `lr0` reached at the final iteration of the exponential
    /// decay schedule.
    pub lr_decay_target: f64,
    /// Number of training iterations.
    pub iters: usize,
    /// Stabilizer added to the state-loss denominator.
    pub delta: f64,
}

impl Default for SystemConfig {
    /// The desk-scale preset; see [`SystemConfig::desk_preset`].
    fn default() -> Self {
        Self::desk_preset()
    }
}

impl SystemConfig {
    /// Full-scale configuration matching the published experimental setup:
    /// 400 MHz, 2 m ROI inside a 3 m ring of 16 transmitters and 32
    /// receivers, 64-grid inversion against a 224-grid simulation, and a
    /// pair of 256-wide, 8-layer networks trained for 4000 iterations.
    ///
    /// Sized for a GPU-class budget; see [`SystemConfig::desk_preset`] for
    /// something a laptop CPU can run.
    pub fn paper_preset() -> Self {
        Self {
            frequency: 4.0e8,
            roi_side: 2.0,
            grid_m: 64,
            grid_gen: 224,
            n_tx: 16,
            n_rx: 32,
            ring_radius: 3.0,
            tx_phase: 0.0,
            rx_phase: 0.0,
            noise_level: 0.05,
            seed: 0,
            omega: 6,
            sigma_sample: 2.0 / 64.0 / 4.0,
            hidden_width: 256,
            mlp_depth: 8,
            lambda_data: 1.00,
            lambda_state: 1.00,
            lambda_tv: 0.01,
            lr0: 5.0e-4,
            lr_decay_target: 0.1,
            iters: 4000,
            delta: 1.0e-12,
        }
    }

    /// Reduced configuration that keeps the same physics but fits a
    /// single-core CPU budget: coarser grids, fewer antennas, smaller
    /// networks, and half the iterations.
    pub fn desk_preset() -> Self {
        Self {
            grid_m: 32,
            grid_gen: 96,
            n_tx: 8,
            n_rx: 16,
            sigma_sample: 2.0 / 32.0 / 4.0,
            hidden_width: 96,
            mlp_depth: 4,
            iters: 2000,
            ..Self::paper_preset()
        }
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.frequency > 0.0) {
            return fail(format!("frequency must be positive, got {}", self.frequency));
        }
        if !(self.roi_side > 0.0) {
            return fail(format!("roi_side must be positive, got {}", self.roi_side));
        }
        if self.grid_m < 2 {
            return fail(format!("grid_m must be at least 2, got {}", self.grid_m));
        }
        if self.grid_gen < self.grid_m {
            return fail(format!(
                "grid_gen ({}) must be at least grid_m ({})",
                self.grid_gen, self.grid_m
            ));
        }
        if self.n_tx < 1 || self.n_rx < 1 {
            return fail(format!(
                "need at least one transmitter and receiver, got {} and {}",
                self.n_tx, self.n_rx
            ));
        }
        let min_ring = self.roi_side * std::f64::consts::SQRT_2 / 2.0;
        if !(self.ring_radius > min_ring) {
            return fail(format!(
                "ring_radius {} must exceed {:.6} so the ring clears the ROI corners",
                self.ring_radius, min_ring
            ));
        }
        if !self.tx_phase.is_finite() || !self.rx_phase.is_finite() {
            return fail("ring phases must be finite".into());
        }
        if !(self.noise_level >= 0.0) {
            return fail(format!(
                "noise_level must be non-negative, got {}",
                self.noise_level
            ));
        }
        if self.omega < 1 {
            return fail(format!("omega must be at least 1, got {}", self.omega));
        }
        if !(self.sigma_sample >= 0.0) {
            return fail(format!(
                "sigma_sample must be non-negative, got {}",
                self.sigma_sample
            ));
        }
        if self.hidden_width < 1 {
            return fail(format!(
                "hidden_width must be at least 1, got {}",
                self.hidden_width
            ));
        }
        if self.mlp_depth < 2 {
            return fail(format!(
                "mlp_depth must be at least 2 (input and output layers), got {}",
                self.mlp_depth
            ));
        }
        if !(self.lambda_data >= 0.0 && self.lambda_state >= 0.0 && self.lambda_tv >= 0.0) {
            return fail(format!(
                "loss weights must be non-negative, got ({}, {}, {})",
                self.lambda_data, self.lambda_state, self.lambda_tv
            ));
        }
        if !(self.lr0 > 0.0) {
            return fail(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.lr_decay_target > 0.0 && self.lr_decay_target <= 1.0) {
            return fail(format!(
                "lr_decay_target must lie in (0, 1], got {}",
                self.lr_decay_target
            ));
        }
        if self.iters < 1 {
            return fail(format!("iters must be at least 1, got {}", self.iters));
        }
        if !(self.delta > 0.0) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }

    /// Free-space wavenumber `k0 = 2 pi f / c`, rad/m.
    pub fn wavenumber(&self) -> f64 {
        wavenumber(self.frequency)
    }
}

/// Free-space wavenumber for a frequency in Hz.
pub fn wavenumber(frequency: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT
}

/// Uniform square discretization of the ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Cells per side.
    pub m: usize,
    /// Cell centers in row-major order: index `i * m + j` is row `i`
    /// (y increasing) and column `j` (x increasing).
    pub centers: Vec<[f64; 2]>,
    /// Side length of one cell, meters.
    pub cell_side: f64,
    /// Area of one cell, m².
    pub cell_area: f64,
}

/// Builds the cell-center grid for an `m x m` tiling of the ROI. Center
/// `(i, j)` sits at `(-side/2 + (j+0.5) h, -side/2 + (i+0.5) h)` with
/// `h = side/m`.
pub fn grid_centers(m: usize, roi_side: f64) -> Grid {
    let h = roi_side / m as f64;
    let half = roi_side / 2.0;
    let mut centers = Vec::with_capacity(m * m);
    for i in 0..m {
        let y = -half + (i as f64 + 0.5) * h;
        for j in 0..m {
            let x = -half + (j as f64 + 0.5) * h;
            centers.push([x, y]);
        }
    }
    Grid {
        m,
        centers,
        cell_side: h,
        cell_area: h * h,
    }
}

/// `n` points equally spaced on a circle of the given radius around the
/// origin; point `k` sits at angle `phase + 2 pi k / n`, counterclockwise.
pub fn ring_positions(n: usize, radius: f64, phase: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let angle = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect()
}

/// One sample position per grid cell, drawn from `N(center, sigma^2)`
/// independently in x and y. Order matches `grid.centers`; the x offset is
/// drawn before the y offset for each cell.
pub fn jitter_samples(grid: &Grid, sigma: f64, rng: &mut Rng) -> Vec<[f64; 2]> {
    grid.centers
        .iter()
        .map(|&[x, y]| {
            if sigma == 0.0 {
                [x, y]
            } else {
                let dx = sigma * rng.normal();
                let dy = sigma * rng.normal();
                [x + dx, y + dy]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wavenumber_matches_definition() {
        assert_relative_eq!(wavenumber(4.0e8), 8.3834, max_relative = 1e-4);
        assert_relative_eq!(wavenumber(5.0e9), 104.79, max_relative = 1e-4);
        assert_relative_eq!(wavenumber(8.0e8), 2.0 * wavenumber(4.0e8));
    }

    #[test]
    fn ring_positions_cardinal_points() {
        let p = ring_positions(4, 3.0, 0.0);
        let expect = [[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0], [0.0, -3.0]];
        for (got, want) in p.iter().zip(&expect) {
            assert_relative_eq!(got[0], want[0], epsilon = 1e-12);
            assert_relative_eq!(got[1], want[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn ring_positions_single_point_with_phase() {
        let p = ring_positions(1, 3.0, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(p[0][0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[0][1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ring_positions_spacing_is_uniform() {
        let p = ring_positions(16, 3.0, 0.0);
        for k in 0..16 {
            let a = (p[k][1]).atan2(p[k][0]);
            let b = (p[(k + 1) % 16][1]).atan2(p[(k + 1) % 16][0]);
            let mut d = b - a;
            while d < 0.0 {
                d += 2.0 * std::f64::consts::PI;
            }
            assert_relative_eq!(d, 2.0 * std::f64::consts::PI / 16.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_centers_two_by_two() {
        let g = grid_centers(2, 2.0);
        assert_eq!(g.centers.len(), 4);
        assert_eq!(g.centers[0], [-0.5, -0.5]);
        assert_eq!(g.centers[1], [0.5, -0.5]);
        assert_eq!(g.centers[2], [-0.5, 0.5]);
        assert_eq!(g.centers[3], [0.5, 0.5]);
        assert_relative_eq!(g.cell_area, 1.0);
    }

    #[test]
    fn grid_centers_middle_of_odd_grid_is_origin() {
        let g = grid_centers(3, 3.0);
        assert_relative_eq!(g.centers[4][0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(g.centers[4][1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_cell_side_is_roi_over_m() {
        let g = grid_centers(64, 2.0);
        assert_relative_eq!(g.cell_side, 0.03125);
        assert_eq!(g.centers.len(), 64 * 64);
    }

    #[test]
    fn jitter_with_zero_sigma_is_identity() {
        let g = grid_centers(8, 2.0);
        let mut rng = Rng::with_stream(1, streams::SAMPLING);
        let s = jitter_samples(&g, 0.0, &mut rng);
        assert_eq!(s, g.centers);
    }

    #[test]
    fn jitter_statistics_match_sigma() {
        let g = grid_centers(2, 2.0);
        let sigma = g.cell_side / 4.0;
        let mut rng = Rng::with_stream(7, streams::SAMPLING);
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let s = jitter_samples(&g, sigma, &mut rng);
            let d = s[0][0] - g.centers[0][0];
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 5.0 * sigma / (n as f64).sqrt());
        assert!((std - sigma).abs() / sigma < 0.03);
    }

    #[test]
    fn presets_validate() {
        assert!(SystemConfig::paper_preset().validate().is_ok());
        assert!(SystemConfig::desk_preset().validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_geometry() {
        let mut c = SystemConfig::desk_preset();
        c.ring_radius = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));

        let mut c = SystemConfig::desk_preset();
        c.grid_gen = c.grid_m - 1;
        assert!(c.validate().is_err());

        let mut c = SystemConfig::desk_preset();
        c.grid_m = 1;
        assert!(c.validate().is_err());

        let mut c = SystemConfig::desk_preset();
        c.delta = 0.0;
        assert!(c.validate().is_err());

        let mut c = SystemConfig::desk_preset();
        c.lr_decay_target = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = SystemConfig::paper_preset();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: SystemConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"{ "frequency": 4.0e8, "not_a_field": 1 }"#;
        assert!(serde_json::from_str::<SystemConfig>(text).is_err());
    }
}
