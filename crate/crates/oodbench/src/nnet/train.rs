//! Minibatch training with per-epoch checkpoints.
//!
//! Both trainers hold out a fraction of the data, record the holdout loss
//! after every epoch, and return the parameters of the epoch with the lowest
//! holdout loss. Variational holdout losses are evaluated with the mean code
//! (zero reparameterization noise) so checkpoint selection is deterministic
//! given the configured stream.

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::nnet::autoencoder::{AutoencoderModel, AutoencoderSpec};
use crate::nnet::grad::{
    ae_loss_and_grads, classifier_loss, classifier_loss_and_grads, vae_loss, vae_loss_and_grads,
};
use crate::nnet::model::ClassifierModel;
use crate::numeric::{argmax, RngStream};

/// Default classifier hidden widths.
pub const CLASSIFIER_HIDDEN: [usize; 2] = [64, 32];

/// Parameter-update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Training hyperparameters plus the randomness source.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Fraction of the data held out for checkpoint selection, in (0, 0.5].
    pub holdout_fraction: f64,
    pub rng: RngStream,
}

impl TrainConfig {
    /// Defaults: Adam(0.9, 0.999, 1e-8), learning rate 1e-3, batch 32,
    /// 50 epochs, 5% holdout.
    pub fn new(rng: RngStream) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            holdout_fraction: 0.05,
            rng,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::BadArgument("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::BadArgument("learning rate must be positive and finite".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.5) {
            return Err(Error::BadArgument("holdout fraction must lie in (0, 0.5]".into()));
        }
        Ok(())
    }
}

/// A trained model plus its selected checkpoint's provenance.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    /// Zero-based epoch whose checkpoint was selected.
    pub best_epoch: usize,
    /// Holdout loss of the selected checkpoint.
    pub holdout_loss: f64,
    /// The held-out samples, for post-training diagnostics.
    pub holdout: Vec<LabeledSample>,
}

struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl OptimizerState {
    fn new(n: usize) -> Self {
        OptimizerState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, opt: Optimizer, lr: f64, params: &mut [f64], grads: &[f64]) {
        match opt {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    params[i] -= lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + epsilon);
                }
            }
        }
    }
}

fn check_inputs(samples: &[LabeledSample]) -> Result<usize> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: samples.len() });
    }
    let dim = samples[0].dim();
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
    }
    Ok(dim)
}

fn holdout_split(n: usize, fraction: f64, rng: &mut RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_hold = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let hold = order[..n_hold].to_vec();
    let train = order[n_hold..].to_vec();
    (train, hold)
}

/// Shared epoch loop: `batch_grad` fills `grads` with the summed per-sample
/// gradients over one batch and returns the summed loss; `holdout_loss`
/// evaluates one sample under the current parameters; `project` maps the
/// parameters back onto the trainer's feasible set after every update. The
/// model travels through as `ctx` so the closures can sync it from the flat
/// parameters.
#[allow(clippy::too_many_arguments)]
fn fit_loop<M>(
    cfg: &TrainConfig,
    rng: &mut RngStream,
    params: &mut Vec<f64>,
    train: &mut [usize],
    hold: &[usize],
    ctx: &mut M,
    mut batch_grad: impl FnMut(&mut M, &[f64], &[usize], &mut [f64], &mut RngStream) -> Result<f64>,
    mut holdout_loss: impl FnMut(&mut M, &[f64], usize) -> Result<f64>,
    mut project: impl FnMut(&mut [f64]),
) -> Result<(usize, f64)> {
    let mut grads = vec![0.0; params.len()];
    let mut opt = OptimizerState::new(params.len());
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    project(params);
    for epoch in 0..cfg.epochs {
        rng.shuffle(train);
        for batch in train.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let loss_sum = batch_grad(ctx, params, batch, &mut grads, rng)?;
            let scale = 1.0 / batch.len() as f64;
            if !(loss_sum * scale).is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            for g in grads.iter_mut() {
                *g *= scale;
            }
            opt.step(cfg.optimizer, cfg.learning_rate, params, &grads);
            project(params);
        }
        let mut hl = 0.0;
        for &i in hold {
            hl += holdout_loss(ctx, params, i)?;
        }
        hl /= hold.len() as f64;
        if !hl.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        if best.as_ref().map_or(true, |(_, b, _)| hl < *b) {
            best = Some((epoch, hl, params.clone()));
        }
    }
    let (best_epoch, best_loss, best_params) = best.expect("at least one epoch");
    *params = best_params;
    Ok((best_epoch, best_loss))
}

/// Trains the task classifier with the default hidden widths (64, 32).
pub fn train_classifier(
    d_tr: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<ClassifierModel>> {
    train_classifier_with(d_tr, cfg, &CLASSIFIER_HIDDEN)
}

/// Trains a task classifier with explicit hidden widths.
///
/// The output layer's weights are constrained nonnegative (projected after
/// every update), so each logit reads as accumulated evidence for its class
/// on top of a learned bias floor. Inputs that excite no class feature then
/// produce logits at the floor, strictly below every in-distribution
/// sample's, which gives classifier-side detectors a usable geometry for
/// foreign inputs.
pub fn train_classifier_with(
    d_tr: &[LabeledSample],
    cfg: &TrainConfig,
    hidden: &[usize],
) -> Result<TrainOutcome<ClassifierModel>> {
    cfg.validate()?;
    let dim = check_inputs(d_tr)?;
    let mut classes: Vec<i32> = d_tr.iter().map(|s| s.task_class).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateData("fewer than two task classes".into()));
    }
    let class_idx = |c: i32| classes.binary_search(&c).expect("class seen during scan");

    let mut rng = cfg.rng.clone();
    let mut model = ClassifierModel::init(dim, hidden, classes.clone(), &mut rng);
    let (mut train, hold) = holdout_split(d_tr.len(), cfg.holdout_fraction, &mut rng);

    let mut params = Vec::new();
    model.mlp.write_params(&mut params);
    let final_layer = model.mlp.layers.last().expect("classifier has layers");
    let n_final = final_layer.weights.rows() * final_layer.weights.cols();
    let final_weights = params.len() - n_final - final_layer.bias.len();
    let (best_epoch, holdout_loss) = fit_loop(
        cfg,
        &mut rng,
        &mut params,
        &mut train,
        &hold,
        &mut model,
        |model, p, batch, grads, _| {
            model.mlp.read_params(p)?;
            let mut sum = 0.0;
            for &i in batch {
                let s = &d_tr[i];
                let (l, _) =
                    classifier_loss_and_grads(model, &s.input, class_idx(s.task_class), grads)?;
                sum += l;
            }
            Ok(sum)
        },
        |model, p, i| {
            model.mlp.read_params(p)?;
            let s = &d_tr[i];
            classifier_loss(model, &s.input, class_idx(s.task_class))
        },
        |p| {
            for w in &mut p[final_weights..final_weights + n_final] {
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        },
    )?;
    model.mlp.read_params(&params)?;
    Ok(TrainOutcome {
        model,
        best_epoch,
        holdout_loss,
        holdout: hold.iter().map(|&i| d_tr[i].clone()).collect(),
    })
}

/// Trains an autoencoder (variational or not) per `arch`.
pub fn train_autoencoder(
    d_tr: &[LabeledSample],
    cfg: &TrainConfig,
    arch: &AutoencoderSpec,
) -> Result<TrainOutcome<AutoencoderModel>> {
    cfg.validate()?;
    let dim = check_inputs(d_tr)?;
    let mut rng = cfg.rng.clone();
    let mut model = AutoencoderModel::init(dim, arch, &mut rng)?;
    let (mut train, hold) = holdout_split(d_tr.len(), cfg.holdout_fraction, &mut rng);

    let enc_n = model.encoder.n_params();
    let mut params = Vec::new();
    model.encoder.write_params(&mut params);
    model.decoder.write_params(&mut params);
    let b = model.bottleneck;
    let variational = model.variational;
    let zero_eps = vec![0.0; b];

    let (best_epoch, holdout_loss) = fit_loop(
        cfg,
        &mut rng,
        &mut params,
        &mut train,
        &hold,
        &mut model,
        |model, p, batch, grads, rng| {
            model.encoder.read_params(&p[..enc_n])?;
            model.decoder.read_params(&p[enc_n..])?;
            let mut sum = 0.0;
            for &i in batch {
                let x = &d_tr[i].input;
                if variational {
                    let eps: Vec<f64> = (0..b).map(|_| rng.normal()).collect();
                    let (l, _) = vae_loss_and_grads(model, x, &eps, grads)?;
                    sum += l.total;
                } else {
                    let (l, _) = ae_loss_and_grads(model, x, grads)?;
                    sum += l;
                }
            }
            Ok(sum)
        },
        |model, p, i| {
            model.encoder.read_params(&p[..enc_n])?;
            model.decoder.read_params(&p[enc_n..])?;
            let x = &d_tr[i].input;
            if variational {
                Ok(vae_loss(model, x, &zero_eps)?.total)
            } else {
                model.reconstruction_loss(x)
            }
        },
        |_| {},
    )?;
    model.encoder.read_params(&params[..enc_n])?;
    model.decoder.read_params(&params[enc_n..])?;
    Ok(TrainOutcome {
        model,
        best_epoch,
        holdout_loss,
        holdout: hold.iter().map(|&i| d_tr[i].clone()).collect(),
    })
}

/// Fraction of samples whose argmax-logit class matches their task class.
pub fn classifier_accuracy(model: &ClassifierModel, samples: &[LabeledSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hits = 0usize;
    for s in samples {
        let logits = model.logits(&s.input)?;
        if model.classes[argmax(&logits)] == s.task_class {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}
