//! Characteristic mapping (CM) solver for the 3D incompressible Euler
//! equations on a periodic box.
//!
//! The evolved object is the backward flow map, stored as a stack of coarse
//! Hermite-jet submaps. Vorticity at any point is reconstructed by pulling
//! back the initial vorticity through the stack, velocity comes from an FFT
//! Biot-Savart solve on a separate sampling grid, and the map is advanced by
//! RK3 characteristics of a time-space Hermite velocity interpolant.
//!
//! Module layout follows the pipeline:
//!
//! - [`grid`], [`jet`], [`epsdiff`], [`io`]: periodic grids, tricubic Hermite
//!   jet fields, the ε-difference jet scheme and the binary field format.
//! - [`spectral`]: FFT vector calculus (Biot-Savart, curl, filters, spectra).
//! - [`flowmap`]: displacement submaps, composition, remapping and pullback.
//! - [`fluid`]: vorticity sampling and the velocity interpolant.
//! - [`scenarios`]: analytic and constructed initial conditions.
//! - [`diagnostics`]: conserved quantities, maxima, slices, tracers.
//! - [`config`], [`driver`], [`convergence`]: batch orchestration.

pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod driver;
pub mod epsdiff;
pub mod error;
pub mod flowmap;
pub mod fluid;
pub mod grid;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use jet::{JetScalarField, JetVectorField, Mask};

/// A point or vector in three dimensions.
pub type Vec3 = [f64; 3];
/// Row-major 3×3 matrix; `m[i][j] = ∂f_i/∂x_j` for Jacobians.
pub type Mat3 = [[f64; 3]; 3];
