//! Analysis chain for training-based MIMO links with residual transmit RF
//! impairments (RTRI).
//!
//! The crate covers LMMSE channel estimation and its error floor, the
//! effective SNR seen by a receiver that treats its estimate as the true
//! channel, a closed-form ergodic rate built on the unordered Wishart
//! eigenvalue density, optimal pilot/data power allocation, and an
//! exhaustive search for the best training length. Every closed form has a
//! Monte-Carlo counterpart in the same module so the two can be compared.
//!
//! Monte-Carlo work runs on rayon when the `parallel` feature is enabled
//! (the default) and falls back to a sequential loop otherwise. Results do
//! not depend on the number of workers: trial `k` always draws from the
//! same counter-derived random stream.

pub mod error;
pub mod estimation;
pub mod exec;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod numerics;
pub mod optimize;
pub mod quadrature;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use model::{LinkConfig, ResourceSplit};
pub use rng::{RandomSource, TrialStreams};

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
