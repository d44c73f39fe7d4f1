//! Hyperparameter grids and the per-trial sweep.

use crate::data::LabeledSample;
use crate::detect::{
    fit, DetectorSpec, FittedDetector, MethodKind, Models, HP_EPSILON, HP_K, HP_SVM_C,
    HP_TEMPERATURE,
};
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// ODIN temperature grid.
pub const ODIN_TEMPERATURES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
/// Perturbation-magnitude grid shared by ODIN and both Mahalanobis variants.
pub const PERTURBATION_EPSILONS: [f64; 5] = [0.0, 0.001, 0.005, 0.01, 0.05];
/// SVM regularization grid.
pub const SVM_COSTS: [f64; 3] = [0.1, 1.0, 10.0];
/// Neighbor-count grid, used only when KNN sweeping is enabled.
pub const KNN_KS: [usize; 4] = [1, 4, 8, 16];

/// The grid of candidate specs for one method, in declared order. Methods
/// without swept hyperparameters get a single default spec; KNN variants
/// sweep `k` only when `sweep_knn_k` is set and otherwise stay at the
/// default `k = 8`.
pub fn sweep_grid(method: MethodKind, sweep_knn_k: bool) -> Vec<DetectorSpec> {
    use MethodKind::*;
    match method {
        Odin => {
            let mut grid = Vec::new();
            for t in ODIN_TEMPERATURES {
                for e in PERTURBATION_EPSILONS {
                    grid.push(
                        DetectorSpec::new(method).with(HP_TEMPERATURE, t).with(HP_EPSILON, e),
                    );
                }
            }
            grid
        }
        MahalanobisSingle | MahalanobisMulti => PERTURBATION_EPSILONS
            .iter()
            .map(|&e| DetectorSpec::new(method).with(HP_EPSILON, e))
            .collect(),
        ScoreSvm => {
            SVM_COSTS.iter().map(|&c| DetectorSpec::new(method).with(HP_SVM_C, c)).collect()
        }
        ImageKnn | FeatureKnn | AeKnn if sweep_knn_k => {
            KNN_KS.iter().map(|&k| DetectorSpec::new(method).with(HP_K, k as f64)).collect()
        }
        _ => vec![DetectorSpec::new(method)],
    }
}

/// Outcome of a sweep: the winning detector and its calibration-split
/// balanced accuracy.
pub struct SweepOutcome {
    pub detector: FittedDetector,
    pub val_balanced_accuracy: f64,
}

/// Fits every grid point on the validation fit split and keeps the one with
/// the highest balanced accuracy on the calibration split. Ties keep the
/// earliest grid point. Each grid point draws from its own child stream, so
/// the outcome does not depend on grid traversal internals.
pub fn sweep(
    grid: &[DetectorSpec],
    models: &Models,
    d_tr_sample: &[LabeledSample],
    val_train: &[LabeledSample],
    val_calib: &[LabeledSample],
    rng: &RngStream,
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut best: Option<SweepOutcome> = None;
    for (g, spec) in grid.iter().enumerate() {
        let mut point_rng = rng.substream(g as u64);
        let detector = fit(spec, models, d_tr_sample, val_train, val_calib, &mut point_rng)?;
        let val_balanced_accuracy = detector.balanced_accuracy_on(val_calib)?;
        if best.as_ref().map_or(true, |b| val_balanced_accuracy > b.val_balanced_accuracy) {
            best = Some(SweepOutcome { detector, val_balanced_accuracy });
        }
    }
    Ok(best.expect("nonempty grid"))
}
