//! Meta-sampling training for multimodal prediction when modalities are
//! partially missing.
//!
//! The crate is `no_std` (with `alloc`) and carries the whole numerical
//! pipeline:
//!
//! - [`diff`]: dense `f64` tensors with define-by-run reverse-mode
//!   differentiation and a finite-difference gradient checker.
//! - [`model`]: a late-fusion network with one encoder per modality and a
//!   regression or classification head.
//! - [`masking`]: the augmented missing-modality transform (contiguous
//!   zero spans with sampled rates).
//! - [`data`]: samples, splits, frozen masks and a synthetic latent-factor
//!   generator.
//! - [`optim`] and [`train`]: SGD/Adam steps, the inner adaptation loop,
//!   the first-order meta-update and the three training regimes
//!   (frozen masks, fresh masks, meta-sampling).
//! - [`metrics`] and [`stats`]: evaluation metrics and Welch's t-test.
//!
//! File formats, configuration and the command line live in the companion
//! `m3s` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod diff;
pub mod error;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod train;

mod num;

pub use error::{Error, Result};
pub use rng::Rng;
