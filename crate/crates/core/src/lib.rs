//! Soft actor-critic with critic-guided action redistribution.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`] and [`adam`]: dense MLPs over flat `f64` parameter vectors with
//!   hand-written reverse mode, plus Adam.
//! - [`distributions`]: tanh-squashed diagonal Gaussians, softmax and
//!   categorical sampling.
//! - [`replay`]: FIFO experience buffer with uniform minibatches.
//! - [`agent`]: the SAC learner (twin critics, targets, learned temperature).
//! - [`cgar`]: critic-guided action redistribution over `K` policy samples.
//! - [`envs`]: pendulum swing-up and point-mass reacher.
//! - [`distill`]: the teacher/student MLP experiment on synthetic blobs.
//! - [`harness`] and [`summary`]: the training driver, evaluation protocol,
//!   metrics files and cross-seed aggregation.

pub mod adam;
pub mod agent;
pub mod cgar;
pub mod config;
pub mod distill;
pub mod distributions;
pub mod envs;
mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod summary;

pub use error::{Error, Result};

/// The RNG used for every stochastic consumer in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
