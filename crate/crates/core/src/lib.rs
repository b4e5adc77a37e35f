//! Split-learning simulator with the gradient inversion label-leakage
//! attack, the gradient-norm baseline and the Gaussian noise defense.

// `!(x > 0.0)` is how NaN gets rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bytes;
mod error;

pub mod data;
pub mod defense;
pub mod eval;
pub mod experiment;
pub mod gia;
pub mod nn;
pub mod normattack;
pub mod numerics;
pub mod protocol;

pub use error::{Error, Result};
