//! Ground-truth scatterer construction: random cylinder collections,
//! bitmap-derived permittivity maps, and rasterization onto grids.
//!
//! All grids in memory use the same convention as [`crate::system::Grid`]:
//! row-major with row 0 at the minimum y. Image files are flipped at the
//! io boundary, never here.

use serde::{Deserialize, Serialize};

use crate::system::Rng;
use crate::{Error, Result};

/// A circular scatterer: uniform relative permittivity inside a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    /// Center x, meters.
    pub x: f64,
    /// Center y, meters.
    pub y: f64,
    /// Radius, meters.
    pub radius: f64,
    /// Relative permittivity inside the disk.
    pub eps: f64,
}

/// A permittivity map sampled on its own square grid, row-major with row 0
/// at minimum y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMap {
    /// Cells per side.
    pub m: usize,
    /// `m * m` relative-permittivity values.
    pub values: Vec<f64>,
}

/// Ground-truth scene on a background of free space (relative permittivity
/// one everywhere outside the scatterers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scene {
    /// A list of disks; on overlap, the later disk wins.
    Cylinders { cylinders: Vec<Cylinder> },
    /// A fixed permittivity raster covering the ROI.
    Raster { raster: RasterMap },
}

impl Scene {
    /// Largest permittivity present in the scene (1.0 for an empty one).
    pub fn max_eps(&self) -> f64 {
        match self {
            Scene::Cylinders { cylinders } => cylinders
                .iter()
                .map(|c| c.eps)
                .fold(1.0, f64::max),
            Scene::Raster { raster } => raster.values.iter().copied().fold(1.0, f64::max),
        }
    }

    /// Checks physical plausibility: permittivities at least one, positive
    /// radii, centers inside the ROI, raster sized consistently.
    pub fn validate(&self, roi_side: f64) -> Result<()> {
        match self {
            Scene::Cylinders { cylinders } => {
                let half = roi_side / 2.0;
                for (k, c) in cylinders.iter().enumerate() {
                    if !(c.eps >= 1.0) {
                        return Err(Error::Domain(format!(
                            "cylinder {k} has relative permittivity {} below 1",
                            c.eps
                        )));
                    }
                    if !(c.radius > 0.0) {
                        return Err(Error::Domain(format!(
                            "cylinder {k} has non-positive radius {}",
                            c.radius
                        )));
                    }
                    if c.x.abs() > half || c.y.abs() > half {
                        return Err(Error::Domain(format!(
                            "cylinder {k} center ({}, {}) lies outside the ROI",
                            c.x, c.y
                        )));
                    }
                }
                Ok(())
            }
            Scene::Raster { raster } => {
                if raster.m == 0 || raster.values.len() != raster.m * raster.m {
                    return Err(Error::Shape(format!(
                        "raster claims {}x{} but holds {} values",
                        raster.m,
                        raster.m,
                        raster.values.len()
                    )));
                }
                if let Some(v) = raster.values.iter().find(|v| !(**v >= 1.0)) {
                    return Err(Error::Domain(format!(
                        "raster contains permittivity {v} below 1"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Draws a random collection of cylinders inside the ROI.
///
/// Draw order per scene: the count (uniform, inclusive), then for each
/// cylinder its radius, center x, center y, and permittivity, each uniform
/// in its range. Centers are confined to the ROI shrunk by the cylinder's
/// own radius so every disk fits entirely inside.
pub fn random_cylinders(
    rng: &mut Rng,
    roi_side: f64,
    count_range: (usize, usize),
    radius_range: (f64, f64),
    eps_range: (f64, f64),
) -> Result<Scene> {
    if count_range.0 > count_range.1 {
        return Err(Error::Domain(format!(
            "count range ({}, {}) is reversed",
            count_range.0, count_range.1
        )));
    }
    if !(radius_range.0 > 0.0) || radius_range.0 > radius_range.1 {
        return Err(Error::Domain(format!(
            "radius range ({}, {}) must be positive and ordered",
            radius_range.0, radius_range.1
        )));
    }
    if radius_range.1 > roi_side / 2.0 {
        return Err(Error::Domain(format!(
            "maximum radius {} cannot fit inside a {} m ROI",
            radius_range.1, roi_side
        )));
    }
    if !(eps_range.0 >= 1.0) || eps_range.0 > eps_range.1 {
        return Err(Error::Domain(format!(
            "permittivity range ({}, {}) must be ordered and at least 1",
            eps_range.0, eps_range.1
        )));
    }

    let span = (count_range.1 - count_range.0) as u64;
    let count = count_range.0 + rng.below(span + 1) as usize;
    let mut cylinders = Vec::with_capacity(count);
    for _ in 0..count {
        let radius = rng.uniform_in(radius_range.0, radius_range.1);
        let reach = roi_side / 2.0 - radius;
        let x = rng.uniform_in(-reach, reach);
        let y = rng.uniform_in(-reach, reach);
        let eps = rng.uniform_in(eps_range.0, eps_range.1);
        cylinders.push(Cylinder { x, y, radius, eps });
    }
    Ok(Scene::Cylinders { cylinders })
}

/// Converts a grayscale raster with values in `[0, 1]` into a permittivity
/// scene. Pixels at or below `threshold` become background (permittivity
/// one); brighter pixels map linearly onto `[eps_min, eps_max]`:
///
/// ```text
/// eps = eps_min + (eps_max - eps_min) * (g - threshold) / (1 - threshold)
/// ```
///
/// The jump from 1 to `eps_min` at the threshold is intentional: object
/// pixels are scatterer material, background is free space, and storage
/// noise below the threshold must not create faint ghost objects.
pub fn bitmap_to_scene(
    gray: &[f64],
    m: usize,
    eps_min: f64,
    eps_max: f64,
    threshold: f64,
) -> Result<Scene> {
    if m == 0 || gray.is_empty() {
        return Err(Error::Domain("bitmap is empty".into()));
    }
    if gray.len() != m * m {
        return Err(Error::Shape(format!(
            "bitmap claims {}x{} but holds {} pixels",
            m,
            m,
            gray.len()
        )));
    }
    if !(eps_min >= 1.0) || eps_max < eps_min {
        return Err(Error::Domain(format!(
            "permittivity endpoints ({eps_min}, {eps_max}) must be ordered and at least 1"
        )));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Domain(format!(
            "threshold {threshold} must lie in [0, 1)"
        )));
    }
    if let Some(g) = gray.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::Domain(format!(
            "bitmap pixel {g} lies outside [0, 1]"
        )));
    }

    let values = gray
        .iter()
        .map(|&g| {
            if g <= threshold {
                1.0
            } else {
                eps_min + (eps_max - eps_min) * (g - threshold) / (1.0 - threshold)
            }
        })
        .collect();
    Ok(Scene::Raster {
        raster: RasterMap { m, values },
    })
}

/// Samples the scene's permittivity on an `m x m` grid over the ROI.
///
/// Cylinder scenes assign each cell the permittivity of the last disk whose
/// interior contains the cell center, or 1 if none does. Raster scenes are
/// resampled by nearest neighbor.
pub fn rasterize(scene: &Scene, m: usize, roi_side: f64) -> Vec<f64> {
    assert!(m >= 2, "rasterize requires at least a 2x2 grid");
    let h = roi_side / m as f64;
    let half = roi_side / 2.0;
    let mut out = vec![1.0; m * m];
    match scene {
        Scene::Cylinders { cylinders } => {
            for i in 0..m {
                let y = -half + (i as f64 + 0.5) * h;
                for j in 0..m {
                    let x = -half + (j as f64 + 0.5) * h;
                    for c in cylinders.iter().rev() {
                        let dx = x - c.x;
                        let dy = y - c.y;
                        if dx * dx + dy * dy < c.radius * c.radius {
                            out[i * m + j] = c.eps;
                            break;
                        }
                    }
                }
            }
        }
        Scene::Raster { raster } => {
            let sm = raster.m;
            for i in 0..m {
                // Cell-center position as a fraction of the ROI, then the
                // nearest source cell.
                let v = (i as f64 + 0.5) / m as f64;
                let si = ((v * sm as f64) as usize).min(sm - 1);
                for j in 0..m {
                    let u = (j as f64 + 0.5) / m as f64;
                    let sj = ((u * sm as f64) as usize).min(sm - 1);
                    out[i * m + j] = raster.values[si * sm + sj];
                }
            }
        }
    }
    out
}
