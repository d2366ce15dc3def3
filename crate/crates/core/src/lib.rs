//! Distributional principal autoencoders and the diagnostics that check
//! their level-set geometry and latent independence.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod data;
pub mod dpa;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod independence;
pub mod levelset;
pub mod linalg;
pub mod mfep;
pub mod nn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use nn::{Mlp, Tensor};
