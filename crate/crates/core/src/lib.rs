//! Thermal- and warpage-aware chiplet placement on 2.5D interposers.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: designs, placements, exact metrics, benchmark synthesis, file IO
//! - [`field`]: scalar grids over the interposer and field comparison metrics
//! - [`oracle`]: finite-difference thermal and plate solvers used as labels
//! - [`compact`]: closed-form thermal and warpage surrogates and their fitting
//! - [`legal`]: MILP initialization and legalization, greedy fallback
//! - [`place`]: the gradient-based placement loop
//! - [`pipeline`]: dataset generation, fitting, placement runs, sweeps
//!
//! Geometry is in mm with the interposer spanning `[0, W] x [0, H]`, power
//! density in W/m², temperature in °C and out-of-plane displacement in µm.

pub mod compact;
pub mod error;
pub mod field;
pub mod legal;
pub mod model;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod place;

pub use error::{Error, Result};
