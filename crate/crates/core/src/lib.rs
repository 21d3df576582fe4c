//! Recursive online identification of continuous-time stochastic Wiener models.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameter vectors, constraint sets, transfer operators, disturbance
//!   SDEs and static nonlinearities, plus the two reference model constructors.
//! - [`discretize`]: matrix exponentials, van Loan covariance integrals, ZOH sampling
//!   of rational operators and their gradient filters, and exosystem-augmented steps.
//! - [`predictor`]: the Monte-Carlo output-error predictor and its gradient.
//! - [`estimator`]: the projected stochastic-Newton recursion.
//! - [`truth`]: data generators for the reference experiments.
//! - [`harness`]: experiment configuration, replication, reporting and the offline
//!   cost oracle.

pub mod discretize;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod predictor;
pub mod rng;
pub mod truth;

pub use error::{Error, Result};
