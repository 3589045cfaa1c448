//! Knowledge Enhancers: weighted first-order clauses injected into a neural
//! classifier as a differentiable final layer.
//!
//! The crate is `no_std` and only needs `alloc`. File IO and the command line
//! live in the `kenn` crate.

#![no_std]
// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod checks;
pub mod enhancer;
pub mod error;
pub mod fuzzy;
pub mod logic;
pub mod matrix;
pub mod miner;
pub mod model;
pub mod relational;
pub mod train;

pub use error::{Error, ParseErrorKind, Result};
pub use matrix::Matrix;
