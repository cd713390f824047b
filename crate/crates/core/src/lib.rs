//! Receding-horizon emulation of linear time-invariant systems by plants
//! whose inputs are restricted to {−1, 0, +1}.
//!
//! The controller stacks the horizon into an integer least-squares problem
//! and solves it exactly (sphere decoding or enumeration), approximately
//! (rounded box-constrained relaxation with a shifted fallback), or by a
//! trained direction classifier.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod classifier;
pub mod emulator;
pub mod error;
pub mod io;
pub mod mpc;
pub mod numerics;
pub mod solvers;
pub mod system;

pub use error::{Error, Result};
