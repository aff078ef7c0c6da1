//! Spectral measures built from orderings of a matrix spectrum.
//!
//! An ordering curve `psi: [0, 1] -> square` ranks points of the plane by their
//! minimal preimage. Reordering a Schur form of `T` along that rank gives an
//! increasing chain of invariant projections; its consecutive differences form
//! a projection-valued measure `E`, and `T = N + Q` with `N = sum z E({z})`
//! normal, sharing the Brown measure of `T`, and `Q` quasinilpotent.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brown;
pub mod curve;
pub mod dyadic;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod json;
pub mod matrix;
pub mod projection;
pub mod region;
pub mod schur;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, C64};
