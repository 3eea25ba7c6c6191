//! Fully nonstationary, heteroscedastic Gaussian process regression.
//!
//! The observation noise variance, signal variance, and lengthscale are
//! each input-dependent latent functions with their own GP priors on the
//! log scale. Inference is exact-gradient: multi-restart gradient ascent
//! for the MAP latent state, and a self-contained No-U-Turn sampler over
//! the whitened latent vectors for the full posterior. Predictions at new
//! inputs extrapolate the latent functions through their prior
//! conditionals and come back as mixtures of Gaussians.
//!
//! Start with the runnable examples (`cargo run --example fit_map`), or
//! with [`harness::generate_dataset`] and [`infer_map::fit_map`].

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod infer_hmc;
pub mod infer_map;
pub mod kernel;
pub mod model;
pub mod objective;
pub mod predict;

pub use error::{NsgpError, Result};
