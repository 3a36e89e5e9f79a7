//! Frame-wise attribute-transition guidance for diffusion samplers.
//!
//! The crate is organized bottom-up:
//!
//! - [`diffusion`]: latent containers, noise schedules, forward corruption, seeded noise.
//! - [`denoiser`]: the noise-prediction contract and an exact analytic Gaussian denoiser.
//! - [`guidance`]: CFG, the transitional direction and the frame-wise refinements.
//! - [`sampler`]: the reverse loop with neutral warmup and baseline modes.
//! - [`metrics`]: wholistic and frame-wise transition scores.
//! - [`bench`]: scenario files, run configs, the benchmark runner and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod guidance;
pub mod metrics;
pub mod sampler;

pub use error::{Error, Result};
