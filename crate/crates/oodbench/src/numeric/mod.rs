//! Deterministic numeric substrate: dense matrices, seeded random streams,
//! SPD linear algebra, and small statistical kernels.
//!
//! Everything here is pure `f64` arithmetic with no shared mutable state, so
//! values can be used concurrently once constructed.

mod linalg;
mod matrix;
pub(crate) mod rng;
mod stats;

pub use linalg::{cholesky_factor, solve_spd, CholeskyFactor};
pub use matrix::Matrix;
pub use rng::RngStream;
pub use stats::{
    argmax, covariance_ridge, k_nearest_indices, kth_nearest_distance, mean,
    mean_and_tied_covariance, median, sample_std, softmax,
};
