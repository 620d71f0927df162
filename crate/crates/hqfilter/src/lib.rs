//! Simulation and filtering for a continuously monitored qubit subject to a
//! classical stochastic disturbance.
//!
//! The crate provides:
//!
//! - [`operators`]: dense complex operator algebra (Pauli / truncated Fock
//!   operators, tensor products, Lindblad generators, coherent states);
//! - [`model`]: the disturbed-qubit model, the cavity that mirrors the
//!   classical disturbance in expectation, and the concatenation of the two
//!   into one open quantum network;
//! - [`truth`]: ground-truth trajectory generation with homodyne
//!   measurement records;
//! - [`sme`]: the stochastic master equation filter on the enlarged
//!   qubit-cavity space;
//! - [`qekf`]: the quantum extended Kalman filter, a fixed-size moment
//!   filter with Riccati covariance propagation;
//! - [`io`]: CSV export of records and estimate series.

pub use nalgebra;
pub use num_complex;

pub mod error;
pub mod io;
pub mod model;
pub mod operators;
pub mod qekf;
pub mod rng;
pub mod sme;
pub mod state;
pub mod truth;

pub use error::{Error, Result};
pub use state::{DensityMatrix, StateProjector, Tolerances};
