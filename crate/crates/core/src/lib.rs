//! Sample entropy estimation with bootstrap uncertainty, and joint selection of
//! the embedding dimension `m`, radius `r` and bootstrap block parameter `q` by
//! Tree-structured Parzen Estimator search.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: signal containers, normalisation, differencing, synthetic generators.
//! - [`entropy`]: SampEn / FuzzEn by template matching and the counting-based SE.
//! - [`bootstrap`]: stationary bootstrap replicates and the variance / bias / MSE estimators.
//! - [`tpe`]: the Parzen surrogate densities and the acquisition step.
//! - [`optimizer`]: the regularised MSE objective and the search drivers.
//! - [`baselines`]: competing radius selection rules.
//! - [`stats`]: ADF, Holm-Šidák, Mann-Whitney, and the stationarity pipeline.
//! - [`experiments`]: synthetic benchmark harnesses.
//! - [`io`]: long / wide CSV ingestion and emission.

pub mod baselines;
pub mod bootstrap;
pub mod entropy;
mod error;
pub mod experiments;
pub mod io;
pub mod optimizer;
mod par;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod tpe;

pub use error::{Error, Result};
pub use signal::{Signal, SignalSet};
