//! Data-driven Neyman-type goodness-of-fit tests.
//!
//! Score statistics `T_k` are built from orthonormal components, the number
//! of components `S` is chosen by a penalized rule, and the resulting `T_S`
//! is calibrated by seeded Monte Carlo simulation.

// `!(x < y)` is used on purpose so that NaN lands on the rejecting side
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod basis;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod majorant;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod selection;
pub mod statistics;

pub use error::{Error, Result};
