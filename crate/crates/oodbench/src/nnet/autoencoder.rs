//! Autoencoder and variational autoencoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::model::{Activation, Mlp};
use crate::numeric::RngStream;

/// Reconstruction loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Bce,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Bce => "bce",
        }
    }
}

/// Clamp bound for BCE reconstruction probabilities.
pub const BCE_CLAMP: f64 = 1e-7;

/// Architecture of an autoencoder to be trained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutoencoderSpec {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub bottleneck: usize,
    pub variational: bool,
    pub loss_kind: LossKind,
}

impl AutoencoderSpec {
    /// Default architecture for inputs of dimension `dim`: one hidden layer
    /// of 32 units and a bottleneck of 8 (an eighth of the input dimension
    /// for larger inputs).
    pub fn default_for(dim: usize, variational: bool, loss_kind: LossKind) -> Self {
        let bottleneck = if dim <= 64 { 8.min(dim.saturating_sub(1)).max(1) } else { dim / 8 };
        AutoencoderSpec { hidden: vec![32], bottleneck, variational, loss_kind }
    }
}

/// Encoder/decoder pair. A variational model's encoder emits `2b` values
/// (means, then log-variances); `encode` returns the means half.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub variational: bool,
    pub loss_kind: LossKind,
    pub bottleneck: usize,
}

impl AutoencoderModel {
    /// Randomly initialized model per `spec`.
    pub fn init(input_dim: usize, spec: &AutoencoderSpec, rng: &mut RngStream) -> Result<Self> {
        if spec.bottleneck == 0 || spec.bottleneck >= input_dim {
            return Err(Error::BadSpec(format!(
                "bottleneck {} must lie in [1, {})",
                spec.bottleneck, input_dim
            )));
        }
        let mut enc_sizes = vec![input_dim];
        enc_sizes.extend_from_slice(&spec.hidden);
        enc_sizes.push(if spec.variational { 2 * spec.bottleneck } else { spec.bottleneck });
        let mut dec_sizes = vec![spec.bottleneck];
        dec_sizes.extend(spec.hidden.iter().rev());
        dec_sizes.push(input_dim);
        Ok(AutoencoderModel {
            encoder: Mlp::init(&enc_sizes, Activation::Identity, rng),
            decoder: Mlp::init(&dec_sizes, Activation::Sigmoid, rng),
            variational: spec.variational,
            loss_kind: spec.loss_kind,
            bottleneck: spec.bottleneck,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Bottleneck code; the means half for a variational model.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut code = self.encoder.forward(x)?;
        code.truncate(self.bottleneck);
        Ok(code)
    }

    /// Decoder output from the (mean) code.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(&self.encode(x)?)
    }

    /// Reconstruction loss of `x` under this model's loss kind, using the
    /// mean code (no sampling) for variational models.
    pub fn reconstruction_loss(&self, x: &[f64]) -> Result<f64> {
        let y = self.reconstruct(x)?;
        elementwise_loss(self.loss_kind, x, &y)
    }
}

/// Mean per-dimension loss between target `x` and reconstruction `y`.
pub fn elementwise_loss(kind: LossKind, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = x.len() as f64;
    match kind {
        LossKind::Mse => Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d),
        LossKind::Bce => {
            if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Domain("BCE target outside [0,1]".into()));
            }
            let total: f64 = x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let p = b.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    -(a * p.ln() + (1.0 - a) * (1.0 - p).ln())
                })
                .sum();
            Ok(total / d)
        }
    }
}

/// KL divergence of `N(μ, diag(exp ℓ))` from `N(0, I)`, divided by the input
/// dimension so it is commensurate with the per-dimension reconstruction
/// losses. Written as `0.5·(μ² + expm1(ℓ) − ℓ)` per code dimension, which is
/// nonnegative term by term.
pub fn vae_kl(means: &[f64], logvars: &[f64], input_dim: usize) -> f64 {
    let total: f64 = means
        .iter()
        .zip(logvars)
        .map(|(&m, &l)| 0.5 * (m * m + l.exp_m1() - l))
        .sum();
    total / input_dim as f64
}
