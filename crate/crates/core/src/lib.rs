#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod nn;
pub mod optim;
pub mod kernels;
pub mod dynamics;
pub mod teaching;
pub mod signals;
pub mod metrics;

pub use error::{Error, Result};
pub mod cli;
