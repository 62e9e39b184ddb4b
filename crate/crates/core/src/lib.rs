//! Offset calibration analysis for sensor networks.
//!
//! A network of `N` sensors observes a common signal, each sensor adding an
//! unknown constant offset and Gaussian noise. Offsets are identifiable only
//! relative to a reference constraint. This crate provides:
//!
//! - [`model`]: network shape, noise covariance, projector and reference
//!   constraints (single sensor or network average).
//! - [`bounds`]: Fisher information, constrained Cramér–Rao bounds and the
//!   closed-form traces for homoscedastic and diagonal noise.
//! - [`estimator`]: constrained weighted least-squares offset estimation.
//! - [`simulator`]: seeded clock-synchronization Monte-Carlo sweeps.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
