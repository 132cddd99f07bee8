//! Simulation and reconstruction toolkit for 2D transverse-magnetic microwave
//! imaging.
//!
//! The forward path discretizes a square region of interest on a pulse-basis
//! grid, builds the discrete Green's operators for a ring of line-source
//! transmitters and point receivers, and solves the volume integral equation
//! by dense LU factorization to produce scattered-field measurements.
//!
//! The inverse path recovers the relative-permittivity map from those
//! measurements. Two reconstruction routes are provided:
//!
//! * backpropagation ([`inversion::bp_reconstruct`]), a fast closed-form
//!   baseline;
//! * a pair of coordinate multilayer perceptrons trained against the data and
//!   state equations of the scattering model ([`inversion::train`]), which
//!   represents the permittivity continuously and can be rendered at any
//!   resolution.
//!
//! Support modules supply the shared numerical kernels ([`numerics`]),
//! measurement geometry and deterministic random sampling ([`system`]),
//! ground-truth scene synthesis ([`scenes`]), network primitives ([`inr`]),
//! image-quality metrics ([`metrics`]), and file formats plus the command
//! line interface ([`io`]).

pub mod inr;
pub mod inversion;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod physics;
pub mod scenes;
pub mod system;

use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration record failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Mathematical argument outside the defined domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or buffer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Linear system is singular or too ill-conditioned to trust.
    #[error("singular system: {0}")]
    Singular(String),

    /// Training produced a non-finite loss and was aborted.
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    /// File contents violate the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
