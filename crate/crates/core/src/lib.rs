//! Spectrum of the fractional Ornstein-Uhlenbeck covariance operator and
//! the small-noise asymptotics of the optimal filtering error.
//!
//! The spectrum is computed three ways: a Nyström oracle, closed-form
//! first-order formulas, and a refined solver built on auxiliary integral
//! equations. [`error_analysis`] uses any of them to evaluate the mean
//! squared error of the optimal linear estimator.

pub mod asymptotics;
pub mod error;
pub mod error_analysis;
pub mod ia_refine;
pub mod model;
pub mod quad;
pub mod report;
pub mod roots;
pub mod spectral_oracle;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
