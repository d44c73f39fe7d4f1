//! Validation-breadth study: rerun the sample-mode protocol with fewer
//! partitions behind the validation split.

use serde::{Deserialize, Serialize};

use crate::data::{BenchmarkData, UseCase};
use crate::error::{Error, Result};
use crate::eval::aggregate::{aggregate, SummaryReport};
use crate::eval::experiment::{run_experiment, ExperimentSpec, ModelSet};

/// The summary obtained at one validation breadth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreadthReport {
    pub n_val_partitions: usize,
    pub summary: SummaryReport,
}

/// Runs the full trial protocol for each breadth in `breadths`, holding the
/// rest of `spec` fixed. Requires a sample-mode use case and a roster with
/// at least one more partition than the largest breadth.
pub fn vary_val_breadth(
    spec: &ExperimentSpec,
    data: &BenchmarkData,
    models: &ModelSet,
    breadths: &[usize],
) -> Result<Vec<BreadthReport>> {
    if spec.use_case != UseCase::Uc1 {
        return Err(Error::BadArgument("breadth study requires the sample-mode use case".into()));
    }
    if breadths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let roster = data.partitions_for(spec.use_case).len();
    let widest = *breadths.iter().max().expect("nonempty");
    if roster < widest + 1 {
        return Err(Error::BadPartitionCount(format!(
            "breadth {widest} needs at least {} partitions, roster has {roster}",
            widest + 1
        )));
    }
    breadths
        .iter()
        .map(|&n| {
            let mut at = spec.clone();
            at.n_val_partitions = n;
            let trials = run_experiment(&at, data, models)?;
            Ok(BreadthReport { n_val_partitions: n, summary: aggregate(&trials)? })
        })
        .collect()
}
