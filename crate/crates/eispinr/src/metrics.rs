//! Quantitative comparison of permittivity maps: per-cell relative RMSE,
//! peak signal-to-noise ratio, and structural similarity.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite PSNR values are capped here so identical images serialize
/// cleanly everywhere (JSON has no infinity).
pub const PSNR_CAP: f64 = 99.0;

/// SSIM window side; inputs must be at least this large.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
/// Floor for the dynamic range so flat truths do not zero the stabilizers.
const SSIM_RANGE_FLOOR: f64 = 1e-6;

/// All three metrics for one reconstruction, evaluated on the
/// ground-truth grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rrmse: f64,
    /// Decibels, capped at [`PSNR_CAP`].
    pub psnr: f64,
    pub ssim: f64,
}

fn check_same_shape(pred: &[f64], truth: &[f64], m: usize) -> Result<()> {
    if pred.len() != m * m || truth.len() != m * m {
        return Err(Error::Shape(format!(
            "expected two {m}x{m} grids, got {} and {} values",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Root mean square of the per-cell relative error:
/// `sqrt(mean(((pred - truth) / truth)^2))`.
pub fn rrmse(pred: &[f64], truth: &[f64], m: usize) -> Result<f64> {
    check_same_shape(pred, truth, m)?;
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if *t == 0.0 {
            return Err(Error::Domain(
                "relative error is undefined where the truth is zero".into(),
            ));
        }
        let r = (p - t) / t;
        acc += r * r;
    }
    Ok((acc / (m * m) as f64).sqrt())
}

/// Peak signal-to-noise ratio in dB with the truth's maximum as the peak:
/// `10 log10(peak^2 / MSE)`. Identical inputs give positive infinity;
/// callers that need a finite number apply [`PSNR_CAP`].
pub fn psnr(pred: &[f64], truth: &[f64], m: usize) -> Result<f64> {
    check_same_shape(pred, truth, m)?;
    let peak = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / (m * m) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Normalized 11x11 Gaussian window, sigma 1.5.
fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as isize;
    let mut sum = 0.0;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let dy = i as isize - c;
            let dx = j as isize - c;
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[i * SSIM_WINDOW + j] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local SSIM with an explicit dynamic range. Windows are evaluated
/// only where they fit entirely inside the grid.
pub fn ssim_with_range(pred: &[f64], truth: &[f64], m: usize, range: f64) -> Result<f64> {
    check_same_shape(pred, truth, m)?;
    if m < SSIM_WINDOW {
        return Err(Error::Domain(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} values, got {m}x{m}; \
             render or resample to a finer grid first"
        )));
    }
    let l = range.max(SSIM_RANGE_FLOOR);
    let c1 = (SSIM_K1 * l) * (SSIM_K1 * l);
    let c2 = (SSIM_K2 * l) * (SSIM_K2 * l);
    let w = gaussian_window();

    let span = m - SSIM_WINDOW + 1;
    let mut acc = 0.0;
    for wi in 0..span {
        for wj in 0..span {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            for i in 0..SSIM_WINDOW {
                let row = (wi + i) * m + wj;
                let wrow = i * SSIM_WINDOW;
                for j in 0..SSIM_WINDOW {
                    mu_x += w[wrow + j] * pred[row + j];
                    mu_y += w[wrow + j] * truth[row + j];
                }
            }
            // Centered second pass keeps flat windows at exactly the
            // zero-variance limit instead of rounding noise near c2.
            let mut var_x = 0.0;
            let mut var_y = 0.0;
            let mut cov = 0.0;
            for i in 0..SSIM_WINDOW {
                let row = (wi + i) * m + wj;
                let wrow = i * SSIM_WINDOW;
                for j in 0..SSIM_WINDOW {
                    let da = pred[row + j] - mu_x;
                    let db = truth[row + j] - mu_y;
                    let g = w[wrow + j];
                    var_x += g * da * da;
                    var_y += g * db * db;
                    cov += g * da * db;
                }
            }
            acc += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
        }
    }
    Ok(acc / (span * span) as f64)
}

/// Mean local SSIM with the dynamic range taken from the truth:
/// `max(truth) - min(truth)`, floored to avoid a zero range.
pub fn ssim(pred: &[f64], truth: &[f64], m: usize) -> Result<f64> {
    check_same_shape(pred, truth, m)?;
    let max = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    ssim_with_range(pred, truth, m, max - min)
}

/// Nearest-neighbor resampling of a row-major square grid to another
/// resolution. Target cell centers map onto source cells by index
/// rounding, matching the raster convention used for scenes.
pub fn resample_nearest(values: &[f64], from_m: usize, to_m: usize) -> Result<Vec<f64>> {
    if from_m == 0 || values.len() != from_m * from_m {
        return Err(Error::Shape(format!(
            "expected a {from_m}x{from_m} grid, got {} values",
            values.len()
        )));
    }
    if to_m == 0 {
        return Err(Error::Shape("target resolution must be positive".into()));
    }
    if to_m == from_m {
        return Ok(values.to_vec());
    }
    let mut out = vec![0.0; to_m * to_m];
    let ratio = from_m as f64 / to_m as f64;
    for i in 0..to_m {
        let si = (((i as f64 + 0.5) * ratio) as usize).min(from_m - 1);
        for j in 0..to_m {
            let sj = (((j as f64 + 0.5) * ratio) as usize).min(from_m - 1);
            out[i * to_m + j] = values[si * from_m + sj];
        }
    }
    Ok(out)
}

/// Computes all three metrics, resampling the prediction to the truth's
/// resolution first when they differ. PSNR is capped at [`PSNR_CAP`].
pub fn evaluate(
    pred: &[f64],
    pred_m: usize,
    truth: &[f64],
    truth_m: usize,
) -> Result<MetricReport> {
    if pred.len() != pred_m * pred_m {
        return Err(Error::Shape(format!(
            "prediction is not a {pred_m}x{pred_m} grid"
        )));
    }
    let resampled;
    let pred_on_truth: &[f64] = if pred_m == truth_m {
        pred
    } else {
        resampled = resample_nearest(pred, pred_m, truth_m)?;
        &resampled
    };
    Ok(MetricReport {
        rrmse: rrmse(pred_on_truth, truth, truth_m)?,
        psnr: psnr(pred_on_truth, truth, truth_m)?.min(PSNR_CAP),
        ssim: ssim(pred_on_truth, truth, truth_m)?,
    })
}
