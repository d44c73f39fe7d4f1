//! The evaluation protocol: metrics, hyperparameter sweeps, timing, the
//! trial loop, aggregation, and the validation-breadth study.

pub mod aggregate;
pub mod breadth;
pub mod experiment;
pub mod metrics;
pub mod sweep;
pub mod timing;

pub use aggregate::{aggregate, CellSummary, MethodSummary, SummaryReport};
pub use breadth::{vary_val_breadth, BreadthReport};
pub use experiment::{
    run_experiment, run_trial, split_val_eighty_twenty, ExperimentSpec, ModelSet, TrainedAux,
    TrialResult,
};
pub use metrics::{accuracy, auprc, confidence_interval_95};
pub use sweep::{
    sweep, sweep_grid, SweepOutcome, KNN_KS, ODIN_TEMPERATURES, PERTURBATION_EPSILONS, SVM_COSTS,
};
pub use timing::measure_timing;
