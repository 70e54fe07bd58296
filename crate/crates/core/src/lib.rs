//! Exact Gaussian laws of spectral Galerkin approximations of the stochastic
//! wave equation with additive noise, the analytic lower bounds on their weak
//! errors, and coupled Monte Carlo estimators that check those bounds.
//!
//! The solution `X = (X^1, X^2)` is represented in orthonormal coordinates:
//! mode `n` carries the pair `(x_n, y_n)`, independent across modes and
//! centred Gaussian with a closed-form 2x2 covariance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod ratefit;
pub mod sampler;

pub use analytics::{Component, ModeMoments, SeriesValue, SincSign};
pub use error::{Error, Result};
pub use model::{build_model, eta_to_model, GalerkinLevel, ModeIndex, ModeSet, ModelParams, SpectralModel};
pub use montecarlo::{Estimate, EstimatorConfig, TestFunction, WeakErrorReport};
pub use ratefit::{ErrorPoint, RateReport};
pub use sampler::{GalerkinSample, RandomStream};
