//! Differentially private GAN training at desk scale.
//!
//! The crate is organised around the private-release pipeline:
//!
//! - [`nn`]: dense networks with per-example, input and double-backprop
//!   gradients, Adam, and the binary checkpoint format.
//! - [`accountant`]: moments accountant for the subsampled Gaussian mechanism.
//! - [`sanitizer`]: grouped clipping, Gaussian perturbation, weight clustering
//!   and adaptive bound estimation.
//! - [`gan`]: WGAN-GP training loops (non-private, basic DP, advanced DP).
//! - [`data`]: synthetic 2-D mixtures, procedural 8x8 digits, CSV I/O, splits.
//! - [`eval`]: inception-style score, JS quality score, mode coverage and the
//!   two-classifier semi-supervised task.
//! - [`config`] and [`run`]: the experiment runner behind the `dpgan` binary.

// NaN-aware guards like `!(x > 0.0)` are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod nn;
pub mod run;
pub mod sanitizer;

pub use error::{Error, Result};

/// Deterministic generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}
