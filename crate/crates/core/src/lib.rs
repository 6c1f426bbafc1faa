//! Low-degree L1 polynomial approximation of Boolean functions under the
//! standard Gaussian measure.
//!
//! The construction smooths a concept `f` with the Ornstein–Uhlenbeck operator
//! `T_rho` and truncates the Hermite expansion of `T_rho f` at degree `d`. The
//! crate also ships the tools needed to check that construction numerically:
//! Hermite algebra and quadrature, seeded Monte-Carlo estimators for noise
//! sensitivity and surface area, the one-dimensional sign-function machinery,
//! and an L1 polynomial-regression learner.

pub mod approx;
pub mod checks;
pub mod cli;
pub mod concepts;
pub mod error;
pub mod hermite;
pub mod integrate;
pub mod learner;
pub mod linalg;
pub mod noise;
pub mod sign;
pub mod stats;

pub use error::{Error, Result};
pub use hermite::{HermiteExpansion, MultiIndex, QuadratureRule};
pub use stats::{CheckReport, EstimateWithError};
