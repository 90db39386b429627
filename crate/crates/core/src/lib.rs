//! Accelerated exponential, Lawson and IMEX integrators for semilinear
//! advection-diffusion-reaction problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backends;
pub mod bench;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod kron;
pub mod linalg;
pub mod ops;
pub mod phi;
pub mod problem;
pub mod runner;
pub mod scheme;
pub mod stability;
pub mod steppers;
pub mod system;
pub mod tuner;

pub use error::{Error, Result};
