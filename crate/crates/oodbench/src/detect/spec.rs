//! Detector method roster and hyperparameter handling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::LossKind;

/// Hyperparameter key: neighbor count for KNN variants.
pub const HP_K: &str = "k";
/// Hyperparameter key: softmax temperature (ODIN).
pub const HP_TEMPERATURE: &str = "temperature";
/// Hyperparameter key: input perturbation magnitude (ODIN, Mahalanobis).
pub const HP_EPSILON: &str = "epsilon";
/// Hyperparameter key: SVM regularization strength.
pub const HP_SVM_C: &str = "svm_c";
/// Hyperparameter key: learning rate for linear-model fitting.
pub const HP_LR: &str = "lr";
/// Hyperparameter key: epoch count for linear-model fitting.
pub const HP_EPOCHS: &str = "epochs";

/// Default neighbor count for all KNN variants.
pub const DEFAULT_K: usize = 8;

/// The implemented OoDD methods. Every method scores higher-is-more-OoD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    ImageKnn,
    ProbThreshold,
    ScoreSvm,
    BinaryClassifier,
    FeatureKnn,
    Odin,
    MahalanobisSingle,
    MahalanobisMulti,
    ReconstAeMse,
    ReconstAeBce,
    ReconstVaeMse,
    ReconstVaeBce,
    AeKnn,
}

impl MethodKind {
    /// All methods, in roster order.
    pub fn all() -> &'static [MethodKind] {
        use MethodKind::*;
        &[
            ImageKnn,
            ProbThreshold,
            ScoreSvm,
            BinaryClassifier,
            FeatureKnn,
            Odin,
            MahalanobisSingle,
            MahalanobisMulti,
            ReconstAeMse,
            ReconstAeBce,
            ReconstVaeMse,
            ReconstVaeBce,
            AeKnn,
        ]
    }

    /// Canonical name, also the config/report spelling.
    pub fn as_str(self) -> &'static str {
        use MethodKind::*;
        match self {
            ImageKnn => "image_knn",
            ProbThreshold => "prob_threshold",
            ScoreSvm => "score_svm",
            BinaryClassifier => "binary_classifier",
            FeatureKnn => "feature_knn",
            Odin => "odin",
            MahalanobisSingle => "mahalanobis_single",
            MahalanobisMulti => "mahalanobis_multi",
            ReconstAeMse => "reconst_ae_mse",
            ReconstAeBce => "reconst_ae_bce",
            ReconstVaeMse => "reconst_vae_mse",
            ReconstVaeBce => "reconst_vae_bce",
            AeKnn => "ae_knn",
        }
    }

    /// Whether fitting/scoring needs the task classifier.
    pub fn requires_classifier(self) -> bool {
        use MethodKind::*;
        matches!(
            self,
            ProbThreshold
                | ScoreSvm
                | BinaryClassifier
                | FeatureKnn
                | Odin
                | MahalanobisSingle
                | MahalanobisMulti
        )
    }

    /// The auxiliary autoencoder flavor this method needs, as
    /// `(variational, loss_kind)`, or `None` for methods without one.
    /// `ae_knn` reads codes from the plain MSE autoencoder's encoder.
    pub fn autoencoder_flavor(self) -> Option<(bool, LossKind)> {
        use MethodKind::*;
        match self {
            ReconstAeMse => Some((false, LossKind::Mse)),
            ReconstAeBce => Some((false, LossKind::Bce)),
            ReconstVaeMse => Some((true, LossKind::Mse)),
            ReconstVaeBce => Some((true, LossKind::Bce)),
            AeKnn => Some((false, LossKind::Mse)),
            _ => None,
        }
    }

    /// Hyperparameter keys this method reads.
    pub fn known_keys(self) -> &'static [&'static str] {
        use MethodKind::*;
        match self {
            ImageKnn | FeatureKnn | AeKnn => &[HP_K],
            ProbThreshold => &[],
            ScoreSvm => &[HP_SVM_C, HP_LR, HP_EPOCHS],
            BinaryClassifier => &[HP_LR, HP_EPOCHS],
            Odin => &[HP_TEMPERATURE, HP_EPSILON],
            MahalanobisSingle => &[HP_EPSILON],
            MahalanobisMulti => &[HP_EPSILON, HP_LR, HP_EPOCHS],
            ReconstAeMse | ReconstAeBce | ReconstVaeMse | ReconstVaeBce => &[],
        }
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::all()
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::BadArgument(format!("unknown method name {s:?}")))
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A method plus its hyperparameter assignment. Absent keys fall back to
/// the documented defaults (`k=8`, `temperature=1`, `epsilon=0`, `svm_c=1`,
/// `lr=0.1`, `epochs=200`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub method: MethodKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl DetectorSpec {
    /// Spec with all hyperparameters at their defaults.
    pub fn new(method: MethodKind) -> Self {
        DetectorSpec { method, hyperparameters: BTreeMap::new() }
    }

    /// Returns the spec with `key` set to `value`.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or(default)
    }

    /// Neighbor count for KNN variants.
    pub fn k(&self) -> usize {
        self.get(HP_K, DEFAULT_K as f64) as usize
    }

    /// Softmax temperature.
    pub fn temperature(&self) -> f64 {
        self.get(HP_TEMPERATURE, 1.0)
    }

    /// Input perturbation magnitude.
    pub fn epsilon(&self) -> f64 {
        self.get(HP_EPSILON, 0.0)
    }

    /// SVM regularization strength.
    pub fn svm_c(&self) -> f64 {
        self.get(HP_SVM_C, 1.0)
    }

    /// Learning rate for linear-model fitting.
    pub fn lr(&self) -> f64 {
        self.get(HP_LR, 0.1)
    }

    /// Epoch count for linear-model fitting.
    pub fn epochs(&self) -> usize {
        self.get(HP_EPOCHS, 200.0) as usize
    }

    /// Rejects keys the method does not read and out-of-domain values.
    pub fn validate(&self) -> Result<()> {
        let known = self.method.known_keys();
        for (key, &value) in &self.hyperparameters {
            if !known.contains(&key.as_str()) {
                return Err(Error::BadArgument(format!(
                    "hyperparameter {key:?} is not used by {}",
                    self.method
                )));
            }
            if !value.is_finite() {
                return Err(Error::BadArgument(format!("hyperparameter {key:?} is not finite")));
            }
            let ok = match key.as_str() {
                HP_K => value >= 1.0 && value.fract() == 0.0,
                HP_TEMPERATURE => value > 0.0,
                HP_EPSILON => value >= 0.0,
                HP_SVM_C | HP_LR => value > 0.0,
                HP_EPOCHS => value >= 1.0 && value.fract() == 0.0,
                _ => unreachable!("key checked against known set"),
            };
            if !ok {
                return Err(Error::BadArgument(format!(
                    "hyperparameter {key:?} = {value} is out of domain"
                )));
            }
        }
        Ok(())
    }
}
