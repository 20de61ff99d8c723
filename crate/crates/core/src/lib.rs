//! Derivative-free global optimization on the parameter torus by adaptive
//! Lipschitz elimination over coordinate-aligned flats.
//!
//! Axis indices are 0-based throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod landscape;
pub mod multi_flat;
pub mod noise;
pub mod oracle;
pub mod quantum;
pub mod slicing;
pub mod torus;

pub use error::{AletError, Result};
