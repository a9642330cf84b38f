//! chks — a desk-scale numerical laboratory for a Cahn-Hilliard system
//! coupled to a Keller-Segel-type nutrient equation with logistic degradation:
//!
//! ```text
//! phi_t = div(grad mu),              mu = -lap(phi) + f(phi) - chi sigma,
//! sigma_t = lap(sigma) - chi div(sigma grad phi) - h sigma^2 + k sigma,
//! ```
//!
//! on a 2D rectangle with homogeneous Neumann boundaries and a singular
//! (logarithmic) configuration potential. The crate provides the discrete
//! operators and norms of the underlying functional setting, implicit
//! steppers that conserve mass and confine the order parameter, the energy /
//! dissipation / phase-metric diagnostics, and an ensemble harness that
//! measures dissipativity (absorbing sets, Hausdorff semi-distances,
//! late-time regularity envelopes).

// `!(x > 0.0)` style guards are used on purpose: they reject NaN along with
// the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod norms;
pub mod potential;
pub mod report;
pub mod snapshot;
pub mod spectral;
pub mod stepper;
pub mod verify;

pub use error::{ConfigError, Error, Result};
pub use grid::{Field, Grid};
pub use potential::{CoeffSpec, PotentialKind, PotentialSpec};
pub use spectral::{SpectralCoeffs, SpectralPlan};
pub use stepper::{ModelParams, State};
