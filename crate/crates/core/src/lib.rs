//! Kinetics of collapse models driven by non-white noise coupled to
//! mass density.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correlators;
pub mod dynamics;
pub mod error;
pub mod observables;
pub mod phenomenology;
pub mod quadrature;
pub mod rates;
pub mod units;

pub use error::{Error, ErrorCategory, Result};
