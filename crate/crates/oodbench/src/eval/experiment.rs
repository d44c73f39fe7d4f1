//! The trial protocol: assemble, balance, sweep, evaluate, time.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    assemble_split, balance, AssembleMode, BenchmarkData, LabeledSample, OodLabel, UseCase,
};
use crate::detect::{DetectorSpec, MethodKind, Models};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, auprc};
use crate::eval::sweep::{sweep, sweep_grid};
use crate::eval::timing::measure_timing;
use crate::nnet::{
    train_autoencoder, train_classifier, AutoencoderModel, AutoencoderSpec, ClassifierModel,
    LossKind, TrainConfig,
};
use crate::numeric::RngStream;

/// Stream id for model training (one per benchmark).
const MODEL_STREAM: u64 = 101;
/// Stream id for trial execution.
const TRIAL_STREAM: u64 = 202;

/// An auxiliary model with its measured training time.
#[derive(Debug, Clone)]
pub struct TrainedAux {
    pub model: AutoencoderModel,
    pub train_seconds: f64,
}

/// All networks an experiment can need, trained once per benchmark and
/// shared read-only across trials.
#[derive(Debug, Clone)]
pub struct ModelSet {
    pub classifier: ClassifierModel,
    pub classifier_train_seconds: f64,
    pub ae_mse: TrainedAux,
    pub ae_bce: TrainedAux,
    pub vae_mse: TrainedAux,
    pub vae_bce: TrainedAux,
}

fn train_aux(
    d_tr: &[LabeledSample],
    rng: RngStream,
    variational: bool,
    loss_kind: LossKind,
) -> Result<TrainedAux> {
    let dim = d_tr.first().map_or(0, |s| s.input.len());
    let arch = AutoencoderSpec::default_for(dim, variational, loss_kind);
    let cfg = TrainConfig::new(rng);
    let start = Instant::now();
    let outcome = train_autoencoder(d_tr, &cfg, &arch)?;
    Ok(TrainedAux { model: outcome.model, train_seconds: start.elapsed().as_secs_f64() })
}

impl ModelSet {
    /// Trains the classifier and the four autoencoder flavors on `d_tr`,
    /// recording wall-clock training times.
    pub fn train(data: &BenchmarkData, seed: u64) -> Result<ModelSet> {
        let root = RngStream::new(seed, MODEL_STREAM);
        let start = Instant::now();
        let classifier = train_classifier(&data.d_tr, &TrainConfig::new(root.substream(0)))?;
        let classifier_train_seconds = start.elapsed().as_secs_f64();
        Ok(ModelSet {
            classifier: classifier.model,
            classifier_train_seconds,
            ae_mse: train_aux(&data.d_tr, root.substream(1), false, LossKind::Mse)?,
            ae_bce: train_aux(&data.d_tr, root.substream(2), false, LossKind::Bce)?,
            vae_mse: train_aux(&data.d_tr, root.substream(3), true, LossKind::Mse)?,
            vae_bce: train_aux(&data.d_tr, root.substream(4), true, LossKind::Bce)?,
        })
    }

    /// The auxiliary model a method depends on, if any.
    pub fn aux_for(&self, method: MethodKind) -> Option<&TrainedAux> {
        method.autoencoder_flavor().map(|flavor| match flavor {
            (false, LossKind::Mse) => &self.ae_mse,
            (false, LossKind::Bce) => &self.ae_bce,
            (true, LossKind::Mse) => &self.vae_mse,
            (true, LossKind::Bce) => &self.vae_bce,
        })
    }

    /// The model handles a method's `fit` call needs.
    pub fn for_method(&self, method: MethodKind) -> Models<'_> {
        Models {
            classifier: method.requires_classifier().then_some(&self.classifier),
            autoencoder: self.aux_for(method).map(|aux| &aux.model),
        }
    }

    /// Auxiliary training seconds charged to a method's setup time.
    pub fn aux_seconds_for(&self, method: MethodKind) -> f64 {
        self.aux_for(method).map_or(0.0, |aux| aux.train_seconds)
    }
}

/// Configuration of one (method, use-case) evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Evaluation (benchmark) name used in reports.
    pub evaluation: String,
    pub method: MethodKind,
    pub use_case: UseCase,
    /// Validation partitions drawn per trial in the sample-mode use-case.
    pub n_val_partitions: usize,
    pub n_trials: usize,
    /// Sweep KNN neighbor counts instead of fixing `k = 8`.
    pub sweep_knn_k: bool,
    /// Batch size for per-sample run-time measurement.
    pub timing_batch: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Defaults: 3 validation partitions, 10 trials, fixed `k`, batch 256.
    pub fn new(evaluation: impl Into<String>, method: MethodKind, use_case: UseCase, seed: u64) -> Self {
        ExperimentSpec {
            evaluation: evaluation.into(),
            method,
            use_case,
            n_val_partitions: 3,
            n_trials: 10,
            sweep_knn_k: false,
            timing_batch: 256,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_case == UseCase::In {
            return Err(Error::BadArgument("use_case must be an out-of-distribution case".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::BadArgument("n_trials must be at least 1".into()));
        }
        if self.n_val_partitions == 0 {
            return Err(Error::BadArgument("n_val_partitions must be at least 1".into()));
        }
        if self.timing_batch == 0 {
            return Err(Error::BadArgument("timing_batch must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metrics and provenance of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub evaluation: String,
    pub method: MethodKind,
    pub use_case: UseCase,
    pub trial_index: usize,
    pub accuracy: f64,
    pub auprc: f64,
    /// Balanced accuracy of the winning grid point on the calibration split.
    pub val_balanced_accuracy: f64,
    pub setup_seconds: f64,
    pub run_seconds_per_sample: f64,
    /// The winning hyperparameter assignment.
    pub chosen: DetectorSpec,
    pub val_partitions: Vec<String>,
    pub test_partitions: Vec<String>,
}

/// Stratified 80/20 split of the balanced validation data; each label side
/// is split separately, so both sub-splits keep both labels.
pub fn split_val_eighty_twenty(
    val_in: &[LabeledSample],
    val_out: &[LabeledSample],
    rng: &mut RngStream,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let mut train = Vec::new();
    let mut calib = Vec::new();
    for side in [val_in, val_out] {
        if side.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: side.len() });
        }
        let mut order: Vec<usize> = (0..side.len()).collect();
        rng.shuffle(&mut order);
        let n_fit = ((0.8 * side.len() as f64).round() as usize).clamp(1, side.len() - 1);
        train.extend(order[..n_fit].iter().map(|&i| side[i].clone()));
        calib.extend(order[n_fit..].iter().map(|&i| side[i].clone()));
    }
    Ok((train, calib))
}

fn trial_rng(spec: &ExperimentSpec, trial_index: usize) -> RngStream {
    RngStream::new(spec.seed, TRIAL_STREAM)
        .substream(spec.method as u64 + 1)
        .substream(spec.use_case as u64 + 1)
        .substream(trial_index as u64 + 1)
}

/// Runs one trial: assembles and balances the splits, sweeps the grid on
/// the 80/20 validation sub-splits, evaluates on the balanced test split,
/// and measures setup and per-sample run time. Bit-reproducible for a
/// given spec and trial index except for the timing fields.
pub fn run_trial(
    spec: &ExperimentSpec,
    data: &BenchmarkData,
    models: &ModelSet,
    trial_index: usize,
) -> Result<TrialResult> {
    spec.validate()?;
    let root = trial_rng(spec, trial_index);

    let partitions = data.partitions_for(spec.use_case);
    if partitions.is_empty() {
        return Err(Error::BadPartitionCount(format!(
            "benchmark has no {} partitions",
            spec.use_case.as_str()
        )));
    }
    let mode = if spec.use_case == UseCase::Uc1 {
        AssembleMode::Sample { n_val_partitions: spec.n_val_partitions }
    } else {
        AssembleMode::EnumerateIndex(trial_index % partitions.len())
    };
    let mut assemble_rng = root.substream(1);
    let assembled = assemble_split(&partitions, mode, &mut assemble_rng)?;

    let mut balance_rng = root.substream(2);
    let (val_in, val_out) = balance(&data.d_val_in, &assembled.d_val_out, &mut balance_rng)?;
    let (test_in, test_out) = balance(&data.d_test_in, &assembled.d_test_out, &mut balance_rng)?;

    let mut split_rng = root.substream(3);
    let (val_train, val_calib) = split_val_eighty_twenty(&val_in, &val_out, &mut split_rng)?;

    let mut d_test = test_in;
    d_test.extend(test_out);
    let batch: Vec<Vec<f64>> =
        (0..spec.timing_batch).map(|i| d_test[i % d_test.len()].input.clone()).collect();

    let grid = sweep_grid(spec.method, spec.sweep_knn_k);
    let model_handles = models.for_method(spec.method);
    let sweep_rng = root.substream(4);
    let (outcome, sweep_seconds, run_seconds_per_sample) = measure_timing(
        || sweep(&grid, &model_handles, &data.d_tr, &val_train, &val_calib, &sweep_rng),
        |o, x| o.detector.score(x),
        &batch,
    )?;
    let setup_seconds = sweep_seconds + models.aux_seconds_for(spec.method);

    let scores = outcome.detector.scores_of(&d_test)?;
    let labels: Vec<OodLabel> = d_test.iter().map(|s| s.ood_label).collect();
    let predictions: Vec<OodLabel> = scores
        .iter()
        .map(|&s| if s > outcome.detector.threshold { OodLabel::Out } else { OodLabel::In })
        .collect();

    Ok(TrialResult {
        evaluation: spec.evaluation.clone(),
        method: spec.method,
        use_case: spec.use_case,
        trial_index,
        accuracy: accuracy(&predictions, &labels)?,
        auprc: auprc(&scores, &labels)?,
        val_balanced_accuracy: outcome.val_balanced_accuracy,
        setup_seconds,
        run_seconds_per_sample,
        chosen: outcome.detector.spec.clone(),
        val_partitions: assembled.val_partition_names,
        test_partitions: assembled.test_partition_names,
    })
}

/// Runs all trials of one experiment cell.
pub fn run_experiment(
    spec: &ExperimentSpec,
    data: &BenchmarkData,
    models: &ModelSet,
) -> Result<Vec<TrialResult>> {
    (0..spec.n_trials).map(|t| run_trial(spec, data, models, t)).collect()
}
