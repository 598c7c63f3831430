//! Gaussian mixture estimation on spectrally embedded data, with
//! bootstrap-averaged EM to counter overfitting and poor local optima.
//!
//! The five estimators live in [`algorithms`]:
//!
//! * `em` - plain EM on the raw data.
//! * `spectral-em` - EM on the rank-G projection `X * V_G`.
//! * `boot-em` - bootstrap-averaged EM on the raw data, stopped by a
//!   Durbin-Watson test on the log-likelihood trace.
//! * `spectral-boot-em` - one SVD up front, bootstrap over embedded rows,
//!   stopped on the scaled relative change of the averaged parameters.
//! * `boot-spectral` - fresh SVD for every bootstrap sample of raw rows.
//!
//! Everything is deterministic given a seed.

pub mod algorithms;
pub mod bootstrap;
pub mod cli;
pub mod convergence;
pub mod datagen;
pub mod error;
pub mod gmm;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod spectral;

pub use algorithms::{fit, Algorithm, EstimationSpace, FitResult, RunConfig};
pub use error::{Error, Result};
pub use gmm::{MixtureComponent, MixtureModel, Responsibilities};
pub use spectral::{spectral_transform, SpectralEmbedding};

/// Observation matrix, one row per observation (`n x p`).
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
