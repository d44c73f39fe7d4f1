//! Aggregation of trial results into per-cell summaries with confidence
//! intervals and a per-method ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::UseCase;
use crate::detect::MethodKind;
use crate::error::{Error, Result};
use crate::eval::experiment::TrialResult;
use crate::eval::metrics::confidence_interval_95;
use crate::numeric::mean;

/// Mean metrics of one (evaluation, use case, method) cell across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub evaluation: String,
    pub use_case: UseCase,
    pub method: MethodKind,
    pub n_trials: usize,
    pub mean_accuracy: f64,
    /// Half-width of the 95% confidence interval; zero for a single trial.
    pub ci_accuracy: f64,
    pub mean_auprc: f64,
    pub ci_auprc: f64,
    pub mean_setup_seconds: f64,
    pub mean_run_seconds_per_sample: f64,
}

/// A method's accuracy averaged over every cell it appears in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodKind,
    pub overall_accuracy: f64,
}

/// Cells in (evaluation, use case, method) order plus methods ranked by
/// overall accuracy, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub cells: Vec<CellSummary>,
    pub methods: Vec<MethodSummary>,
}

fn ci_half_width(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Ok(0.0);
    }
    let (_, half_width) = confidence_interval_95(values)?;
    Ok(half_width)
}

/// Groups trials into cells and averages their metrics. Cell means are
/// unweighted over trials, method ranks are unweighted over cells, and the
/// result does not depend on the order trials arrive in.
pub fn aggregate(trials: &[TrialResult]) -> Result<SummaryReport> {
    if trials.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: BTreeMap<(String, UseCase, MethodKind), Vec<&TrialResult>> = BTreeMap::new();
    for t in trials {
        groups.entry((t.evaluation.clone(), t.use_case, t.method)).or_default().push(t);
    }

    let mut cells = Vec::with_capacity(groups.len());
    for ((evaluation, use_case, method), mut cell) in groups {
        cell.sort_by_key(|t| t.trial_index);
        let collect = |f: fn(&TrialResult) -> f64| -> Vec<f64> { cell.iter().map(|t| f(t)).collect() };
        let accuracies = collect(|t| t.accuracy);
        let auprcs = collect(|t| t.auprc);
        cells.push(CellSummary {
            evaluation,
            use_case,
            method,
            n_trials: cell.len(),
            mean_accuracy: mean(&accuracies)?,
            ci_accuracy: ci_half_width(&accuracies)?,
            mean_auprc: mean(&auprcs)?,
            ci_auprc: ci_half_width(&auprcs)?,
            mean_setup_seconds: mean(&collect(|t| t.setup_seconds))?,
            mean_run_seconds_per_sample: mean(&collect(|t| t.run_seconds_per_sample))?,
        });
    }

    let mut methods = Vec::new();
    for &method in MethodKind::all() {
        let own: Vec<f64> =
            cells.iter().filter(|c| c.method == method).map(|c| c.mean_accuracy).collect();
        if !own.is_empty() {
            methods.push(MethodSummary { method, overall_accuracy: mean(&own)? });
        }
    }
    methods.sort_by(|a, b| b.overall_accuracy.partial_cmp(&a.overall_accuracy).unwrap());

    Ok(SummaryReport { cells, methods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::DetectorSpec;

    fn trial(
        method: MethodKind,
        use_case: UseCase,
        trial_index: usize,
        accuracy: f64,
        auprc: f64,
    ) -> TrialResult {
        TrialResult {
            evaluation: "synthetic".into(),
            method,
            use_case,
            trial_index,
            accuracy,
            auprc,
            val_balanced_accuracy: accuracy,
            setup_seconds: 1.0,
            run_seconds_per_sample: 0.001,
            chosen: DetectorSpec::new(method),
            val_partitions: vec!["a".into()],
            test_partitions: vec!["b".into()],
        }
    }

    #[test]
    fn cell_means_match_hand_computation() {
        let trials = vec![
            trial(MethodKind::ImageKnn, UseCase::Uc1, 0, 0.9, 0.8),
            trial(MethodKind::ImageKnn, UseCase::Uc1, 1, 0.7, 0.6),
        ];
        let report = aggregate(&trials).unwrap();
        assert_eq!(report.cells.len(), 1);
        let c = &report.cells[0];
        assert_eq!(c.n_trials, 2);
        assert!((c.mean_accuracy - 0.8).abs() < 1e-15);
        assert!((c.mean_auprc - 0.7).abs() < 1e-15);
        // Half-width of 1.96 * s / sqrt(n) with s = 0.1 * sqrt(2), n = 2.
        let expect = 1.96 * (0.1f64 * 2.0f64.sqrt()) / 2.0f64.sqrt();
        assert!((c.ci_accuracy - expect).abs() < 1e-12);
    }

    #[test]
    fn single_trial_cells_report_zero_width() {
        let report = aggregate(&[trial(MethodKind::Odin, UseCase::Uc2, 0, 0.75, 0.7)]).unwrap();
        assert_eq!(report.cells[0].ci_accuracy, 0.0);
        assert_eq!(report.cells[0].ci_auprc, 0.0);
    }

    #[test]
    fn methods_rank_by_overall_accuracy_descending() {
        let trials = vec![
            trial(MethodKind::ProbThreshold, UseCase::Uc1, 0, 0.6, 0.6),
            trial(MethodKind::ProbThreshold, UseCase::Uc3, 0, 0.8, 0.8),
            trial(MethodKind::ImageKnn, UseCase::Uc1, 0, 0.9, 0.9),
            trial(MethodKind::ImageKnn, UseCase::Uc3, 0, 0.3, 0.3),
        ];
        let report = aggregate(&trials).unwrap();
        let order: Vec<MethodKind> = report.methods.iter().map(|m| m.method).collect();
        assert_eq!(order, vec![MethodKind::ProbThreshold, MethodKind::ImageKnn]);
        assert!((report.methods[0].overall_accuracy - 0.7).abs() < 1e-15);
        assert!((report.methods[1].overall_accuracy - 0.6).abs() < 1e-15);
    }

    #[test]
    fn aggregation_is_invariant_to_trial_order() {
        let mut trials = vec![
            trial(MethodKind::ImageKnn, UseCase::Uc1, 0, 0.91, 0.91),
            trial(MethodKind::ImageKnn, UseCase::Uc1, 1, 0.52, 0.55),
            trial(MethodKind::ImageKnn, UseCase::Uc1, 2, 0.73, 0.71),
            trial(MethodKind::Odin, UseCase::Uc2, 0, 0.66, 0.62),
        ];
        let forward = aggregate(&trials).unwrap();
        trials.reverse();
        let backward = aggregate(&trials).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
    }
}
