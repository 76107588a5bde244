//! Minimum-energy sizing of an electric motor and fixed-gear transmission.
//!
//! The pipeline samples a high-fidelity motor loss oracle over a design plan,
//! fits a convex per-power-level quadratic loss surrogate, solves for the
//! (rated power, relative length, gear ratio) that minimizes battery energy
//! over a drive cycle, and re-simulates the optimum through the oracle.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod config;
pub mod cycle;
pub mod designopt;
pub mod doe;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod surrogate;
pub mod validate;
pub mod vehicle;

pub use error::{Error, Result};
