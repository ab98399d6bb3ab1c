//! Solver and Monte Carlo verifier for cone-constrained stochastic LQ control
//! of a scalar jump diffusion with Markovian regime switching.
//!
//! Pipeline: [`model`] describes the problem, [`riccati`] integrates the
//! coupled Riccati system backward in time, [`feedback`] turns the solution
//! into a state-feedback law, and [`sim`] simulates the closed loop and
//! checks the realized cost against the predicted optimal value.

pub mod cli;
pub mod error;
pub mod feedback;
pub mod hamiltonians;
pub mod model;
pub mod presets;
pub mod riccati;
pub mod sim;

pub use error::{Error, ErrorClass, Result};
