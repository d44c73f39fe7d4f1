//! Out-of-distribution detection (OoDD) toolkit.
//!
//! The crate implements a roster of OoDD methods behind one
//! fit/score/predict abstraction, minimal trainable feed-forward networks
//! for the methods that need them, synthetic benchmarks realizing three
//! out-of-distribution use-cases, and a train → calibrate → test evaluation
//! protocol with repeated trials, hyperparameter sweeps, and
//! accuracy/AUPRC/timing reports.
//!
//! Everything is deterministic: every random choice flows through a seeded
//! [`numeric::RngStream`], so a run is reproducible from its configuration
//! and seed alone.

pub mod data;
pub mod detect;
pub mod error;
pub mod eval;
pub mod nnet;
pub mod numeric;

pub use error::{Error, Result};
