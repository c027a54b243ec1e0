//! Recursive kernel estimation of the innovation density in nonparametric
//! functional autoregressive models.

// `!(x > 0.0)` is deliberate: NaN must fail every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiments;
pub mod index;
pub mod kernels;
pub mod model;
pub mod numeric;
pub mod regression;
pub mod rng;
pub mod tuning;
pub mod validation;

pub use error::{Error, Result};
