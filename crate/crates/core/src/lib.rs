// NaN inputs must fail the `!(x > 0.0)` style guards; tabulated constants keep every digit.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bubbles;
pub mod domain;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod interaction;
pub mod linalg;
pub mod quadrature;
pub mod scaling;
pub mod solver;

pub use error::{Error, Result};
