//! Wall-clock measurement of detector setup and per-sample scoring.

use std::time::Instant;

use crate::error::{Error, Result};

/// Runs `setup` and then scores every batch element, returning the setup
/// result, the setup wall-clock seconds, and the mean per-sample scoring
/// seconds. The score sum passes through a black box so scoring cannot be
/// optimized away.
pub fn measure_timing<S, F, G>(setup: F, score: G, batch: &[Vec<f64>]) -> Result<(S, f64, f64)>
where
    F: FnOnce() -> Result<S>,
    G: Fn(&S, &[f64]) -> Result<f64>,
{
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let start = Instant::now();
    let state = setup()?;
    let setup_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut checksum = 0.0;
    for x in batch {
        checksum += score(&state, x)?;
    }
    std::hint::black_box(checksum);
    let run_seconds_per_sample = start.elapsed().as_secs_f64() / batch.len() as f64;
    Ok((state, setup_seconds, run_seconds_per_sample))
}
