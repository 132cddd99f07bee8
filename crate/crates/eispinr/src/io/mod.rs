//! Persistence for every artifact the pipeline produces: measurement and
//! scene documents, binary network checkpoints, permittivity images with
//! exact-value sidecars, loss logs, and metric reports.
//!
//! Structured documents are JSON with an explicit `format_version`.
//! Floating-point values round-trip bit-exactly: JSON uses
//! shortest-round-trip decimal, sidecars use 17 significant digits.

pub mod cli;

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::inr::{InrCheckpoint, MlpArch, MlpParams};
use crate::inversion::LossBreakdown;
use crate::metrics::MetricReport;
use crate::numerics::CMatrix;
use crate::physics::MeasurementSet;
use crate::scenes::Scene;
use crate::system::SystemConfig;
use crate::{Error, Result};

/// Version written into every structured document.
pub const FORMAT_VERSION: u32 = 1;

/// Leading bytes of a checkpoint file.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EISPINR1";

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: format_version {version} is not supported (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    format_version: u32,
    config: SystemConfig,
    noise_level_applied: f64,
    /// Receiver-major complex values as [re, im] pairs.
    e_s: Vec<Vec<[f64; 2]>>,
    ground_truth: Option<Vec<f64>>,
}

/// Writes a measurement set as a JSON document.
pub fn save_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    set.validate()?;
    let e_s = (0..set.e_s.rows())
        .map(|r| set.e_s.row(r).iter().map(|v| [v.re, v.im]).collect())
        .collect();
    write_json(
        path,
        &MeasurementFile {
            format_version: FORMAT_VERSION,
            config: set.config.clone(),
            noise_level_applied: set.noise_level_applied,
            e_s,
            ground_truth: set.ground_truth.clone(),
        },
    )
}

/// Reads a measurement document, checking version and dimensions.
pub fn load_measurements(path: &Path) -> Result<MeasurementSet> {
    let file: MeasurementFile = parse_json(path, &read_to_string(path)?)?;
    check_version(path, file.format_version)?;
    let rows = file.e_s.len();
    let cols = file.e_s.first().map_or(0, Vec::len);
    if file.e_s.iter().any(|r| r.len() != cols) {
        return Err(Error::Format(format!(
            "{}: scattered-field rows have inconsistent lengths",
            path.display()
        )));
    }
    let data = file
        .e_s
        .iter()
        .flatten()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    let set = MeasurementSet {
        e_s: CMatrix::from_vec(rows, cols, data)?,
        config: file.config,
        noise_level_applied: file.noise_level_applied,
        ground_truth: file.ground_truth,
    };
    set.validate().map_err(|e| {
        Error::Format(format!("{}: inconsistent document: {e}", path.display()))
    })?;
    Ok(set)
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format_version: u32,
    /// ROI side the scene was authored for, meters.
    roi_side: f64,
    scene: Scene,
}

/// Writes a scene with the ROI side it belongs to.
pub fn save_scene(path: &Path, scene: &Scene, roi_side: f64) -> Result<()> {
    scene.validate(roi_side)?;
    write_json(
        path,
        &SceneFile {
            format_version: FORMAT_VERSION,
            roi_side,
            scene: scene.clone(),
        },
    )
}

/// Reads and validates a scene document. Returns the scene and its ROI
/// side.
pub fn load_scene(path: &Path) -> Result<(Scene, f64)> {
    let file: SceneFile = parse_json(path, &read_to_string(path)?)?;
    check_version(path, file.format_version)?;
    file.scene.validate(file.roi_side).map_err(|e| {
        Error::Format(format!("{}: invalid scene: {e}", path.display()))
    })?;
    Ok((file.scene, file.roi_side))
}

/// Writes a system configuration document.
pub fn save_config(path: &Path, config: &SystemConfig) -> Result<()> {
    config.validate()?;
    write_json(path, config)
}

/// Reads a configuration document; missing keys take their default
/// values, unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let config: SystemConfig = parse_json(path, &read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    omega: usize,
    roi_side: f64,
    ring_radius: f64,
    f_arch: MlpArch,
    h_arch: Option<MlpArch>,
    /// Total number of 64-bit values in the parameter blob.
    param_count: usize,
}

/// Writes a checkpoint: the magic tag, a little-endian u32 header length,
/// a JSON header, then every parameter as little-endian 64-bit floats
/// (permittivity network first, current network after it, each in layer
/// order).
pub fn save_checkpoint(path: &Path, ckpt: &InrCheckpoint) -> Result<()> {
    let f_len = ckpt.f_net.data().len();
    let h_len = ckpt.h_net.as_ref().map_or(0, |h| h.data().len());
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        omega: ckpt.omega,
        roi_side: ckpt.roi_side,
        ring_radius: ckpt.ring_radius,
        f_arch: *ckpt.f_net.arch(),
        h_arch: ckpt.h_net.as_ref().map(|h| *h.arch()),
        param_count: f_len + h_len,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let mut out = Vec::with_capacity(12 + header_bytes.len() + 8 * (f_len + h_len));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for &v in ckpt.f_net.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(h) = &ckpt.h_net {
        for &v in h.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(fs::write(path, out)?)
}

/// Reads a checkpoint written by [`save_checkpoint`], restoring every
/// parameter bit-exactly.
pub fn load_checkpoint(path: &Path) -> Result<InrCheckpoint> {
    let bad = |detail: String| Error::Format(format!("{}: {detail}", path.display()));
    let bytes = fs::read(path).map_err(|e| bad(e.to_string()))?;
    if bytes.len() < 12 {
        return Err(bad(format!(
            "file holds {} bytes, shorter than the fixed 12-byte prefix",
            bytes.len()
        )));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file (magic tag mismatch)".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(bad(format!(
            "header declares {header_len} bytes but only {} remain",
            bytes.len() - 12
        )));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| bad(format!("invalid header: {e}")))?;
    check_version(path, header.format_version)?;

    let expected = header.f_arch.param_len()
        + header.h_arch.map_or(0, |a| a.param_len());
    if header.param_count != expected {
        return Err(bad(format!(
            "header counts {} parameters but the declared shapes need {expected}",
            header.param_count
        )));
    }
    let blob = &bytes[12 + header_len..];
    if blob.len() != 8 * expected {
        return Err(bad(format!(
            "parameter blob holds {} bytes, expected {}",
            blob.len(),
            8 * expected
        )));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let f_len = header.f_arch.param_len();
    let f_net = MlpParams::from_vec(header.f_arch, values.by_ref().take(f_len).collect())?;
    let h_net = match header.h_arch {
        Some(arch) => Some(MlpParams::from_vec(arch, values.collect())?),
        None => None,
    };
    Ok(InrCheckpoint {
        omega: header.omega,
        roi_side: header.roi_side,
        ring_radius: header.ring_radius,
        f_net,
        h_net,
    })
}

/// How grid values map to gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImageScale {
    /// Map the grid's own minimum and maximum to black and white. A flat
    /// grid degenerates to all-zero pixels.
    MinMax,
    /// Map the fixed interval to black..white, clamping outliers.
    Fixed(f64, f64),
}

/// Writes a row-major grid as `<stem>.pgm` (16-bit portable graymap) plus
/// `<stem>.csv` (exact values, 17 significant digits).
///
/// Grids store row 0 at the bottom of the ROI (smallest y); the graymap
/// is written top row first, so rows are flipped on export. The sidecar
/// keeps grid order. The graymap header records the applied value range
/// in a comment.
pub fn export_image(grid: &[f64], m: usize, stem: &Path, scale: ImageScale) -> Result<()> {
    if m == 0 || grid.len() != m * m {
        return Err(Error::Shape(format!(
            "expected an {m}x{m} grid, got {} values",
            grid.len()
        )));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cannot export a non-finite grid".into()));
    }
    let (lo, hi) = match scale {
        ImageScale::MinMax => (
            grid.iter().cloned().fold(f64::INFINITY, f64::min),
            grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
        ImageScale::Fixed(lo, hi) => {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "fixed image range needs lo < hi, got [{lo}, {hi}]"
                )));
            }
            (lo, hi)
        }
    };

    let mut pgm = Vec::with_capacity(64 + 2 * m * m);
    pgm.extend_from_slice(
        format!("P5\n# eps range {lo:.16e} {hi:.16e}\n{m} {m}\n65535\n").as_bytes(),
    );
    for i in (0..m).rev() {
        for j in 0..m {
            let v = grid[i * m + j];
            let pixel = if lo == hi {
                0u16
            } else {
                (((v - lo) / (hi - lo) * 65535.0).round()).clamp(0.0, 65535.0) as u16
            };
            pgm.extend_from_slice(&pixel.to_be_bytes());
        }
    }
    fs::write(stem.with_extension("pgm"), pgm)?;

    let mut csv = String::with_capacity(m * m * 26);
    for i in 0..m {
        for j in 0..m {
            if j > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{:.16e}", grid[i * m + j]));
        }
        csv.push('\n');
    }
    fs::write(stem.with_extension("csv"), csv)?;
    Ok(())
}

/// Reads a square comma-delimited grid written by [`export_image`]'s
/// sidecar (or any file of that shape). Returns the values and the side
/// length.
pub fn load_grid(path: &Path) -> Result<(Vec<f64>, usize)> {
    let text = read_to_string(path)?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!(
                    "{}: line {} has {} values, previous rows had {c}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        for cell in row {
            values.push(cell.trim().parse::<f64>().map_err(|e| {
                Error::Format(format!(
                    "{}: line {}: {e}: {cell:?}",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || rows != cols {
        return Err(Error::Format(format!(
            "{}: expected a square grid, got {rows} rows of {cols} values",
            path.display()
        )));
    }
    Ok((values, rows))
}

/// Writes the per-iteration loss history as CSV. Timing is deliberately
/// excluded so repeated runs with one seed produce identical bytes.
pub fn save_loss_log(path: &Path, history: &[LossBreakdown]) -> Result<()> {
    let mut out = String::with_capacity(32 + history.len() * 100);
    out.push_str("iter,total,data,state,tv\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!(
            "{i},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            l.total, l.data, l.state, l.tv
        ));
    }
    Ok(fs::write(path, out)?)
}

#[derive(Serialize, Deserialize)]
struct MetricsFile {
    format_version: u32,
    #[serde(flatten)]
    report: MetricReport,
}

/// Writes a metric report as a JSON document.
pub fn save_metrics(path: &Path, report: &MetricReport) -> Result<()> {
    write_json(
        path,
        &MetricsFile {
            format_version: FORMAT_VERSION,
            report: *report,
        },
    )
}

/// Reads a metric report document.
pub fn load_metrics(path: &Path) -> Result<MetricReport> {
    let file: MetricsFile = parse_json(path, &read_to_string(path)?)?;
    check_version(path, file.format_version)?;
    Ok(file.report)
}

/// One-line text rendering of a metric report.
pub fn format_metrics_line(report: &MetricReport) -> String {
    format!(
        "rrmse={:.6} psnr={:.2} ssim={:.6}",
        report.rrmse, report.psnr, report.ssim
    )
}

/// Appends a line to a text log file, creating it if needed. Used by the
/// CLI for run journals.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}
