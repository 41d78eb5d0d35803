//! Factor-augmented regression for high-dimensional dependent panels.
//!
//! The pipeline: regress each series on observed covariates, then recover a
//! low-dimensional set of dynamic latent factors from the residual panel via
//! lagged-autocovariance eigenanalysis, with a rank-based high-dimensional
//! white-noise test selecting the number of factors. Forecasts combine the
//! regression part with a VAR(1) on covariates and factors.

pub mod cli;
pub mod error;
pub mod factor;
pub mod forecast;
pub mod linalg;
pub mod metrics;
pub mod regression;
pub mod simulate;
pub mod whitenoise;

pub use error::{Error, Result, Warning};
