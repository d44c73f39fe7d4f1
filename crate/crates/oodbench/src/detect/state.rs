//! Learned detector state: Gaussian class models, linear heads, vote pools.

use serde::{Deserialize, Serialize};

use crate::data::OodLabel;
use crate::error::{Error, Result};
use crate::numeric::{mean_and_tied_covariance, CholeskyFactor};

/// Per-class means with one tied covariance, stored as its Cholesky factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianState {
    /// `(class id, mean)` pairs in fit order.
    pub means: Vec<(i32, Vec<f64>)>,
    pub covariance: CholeskyFactor,
    /// Input perturbation magnitude applied before distance evaluation.
    pub epsilon: f64,
}

impl GaussianState {
    /// Estimates means and the tied covariance from per-class feature groups.
    pub fn fit(groups: &[(i32, Vec<Vec<f64>>)], epsilon: f64) -> Result<Self> {
        let (means, cov) = mean_and_tied_covariance(groups)?;
        Ok(GaussianState { means, covariance: CholeskyFactor::of(&cov)?, epsilon })
    }

    /// Smallest Mahalanobis distance `(f - mu_c)' Sigma^-1 (f - mu_c)` over classes.
    pub fn min_distance(&self, features: &[f64]) -> Result<f64> {
        Ok(self.distance_to_nearest(features)?.1)
    }

    /// Index of the nearest class mean and its distance.
    pub fn distance_to_nearest(&self, features: &[f64]) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, mu)) in self.means.iter().enumerate() {
            if mu.len() != features.len() {
                return Err(Error::DimensionMismatch { expected: mu.len(), got: features.len() });
            }
            let diff: Vec<f64> = features.iter().zip(mu).map(|(f, m)| f - m).collect();
            let d = self.covariance.quadratic_form_inv(&diff)?;
            if best.map_or(true, |(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        best.ok_or(Error::EmptyInput)
    }

    /// Gradient of the nearest-class distance with respect to the features:
    /// `2 Sigma^-1 (f - mu_c*)`.
    pub fn nearest_distance_gradient(&self, features: &[f64]) -> Result<Vec<f64>> {
        let (c, _) = self.distance_to_nearest(features)?;
        let mu = &self.means[c].1;
        let diff: Vec<f64> = features.iter().zip(mu).map(|(f, m)| f - m).collect();
        let mut g = self.covariance.solve(&diff)?;
        for v in &mut g {
            *v *= 2.0;
        }
        Ok(g)
    }
}

/// A linear head `w . x + b` used for the SVM, the binary classifier, and
/// the multi-layer Mahalanobis combiner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    /// Signed margin `w . x + b`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: x.len() });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Logistic output `sigmoid(w . x + b)`.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn check_rows(features: &[Vec<f64>], n_labels: usize) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    if features.len() != n_labels {
        return Err(Error::DimensionMismatch { expected: features.len(), got: n_labels });
    }
    let dim = features[0].len();
    for f in features {
        if f.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
        }
    }
    Ok(dim)
}

/// Per-dimension standardization of a feature matrix; constant dimensions
/// keep scale 1 so the transform stays invertible.
struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    fn fit(features: &[Vec<f64>], dim: usize) -> Standardizer {
        let n = features.len() as f64;
        let mut means = vec![0.0; dim];
        for x in features {
            for (m, v) in means.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut scales = vec![0.0; dim];
        for x in features {
            for ((s, m), v) in scales.iter_mut().zip(&means).zip(x) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scales {
            *s = s.sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    fn apply(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect()
    }

    /// Rewrites a model trained on standardized features so it consumes raw
    /// features: `w·(x−μ)/σ + b = (w/σ)·x + (b − Σ wᵢμᵢ/σᵢ)`.
    fn fold_into(&self, model: LinearModel) -> LinearModel {
        let weights: Vec<f64> =
            model.weights.iter().zip(&self.scales).map(|(w, s)| w / s).collect();
        let shift: f64 =
            weights.iter().zip(&self.means).map(|(w, m)| w * m).sum();
        LinearModel { weights, bias: model.bias - shift }
    }
}

/// Trains a linear SVM by full-batch subgradient descent on
/// `||w||^2 / (2 n c) + mean(hinge)`, out samples positive. Features are
/// standardized internally and the transform folded back into the returned
/// weights. Deterministic: weights start at zero and updates are full-batch.
pub fn train_linear_svm(
    features: &[Vec<f64>],
    labels: &[OodLabel],
    c: f64,
    lr: f64,
    epochs: usize,
) -> Result<LinearModel> {
    let dim = check_rows(features, labels.len())?;
    if !(c > 0.0) || !(lr > 0.0) || epochs == 0 {
        return Err(Error::BadArgument("svm needs c > 0, lr > 0, epochs >= 1".into()));
    }
    let standardizer = Standardizer::fit(features, dim);
    let features = standardizer.apply(features);
    let n = features.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..epochs {
        let mut gw: Vec<f64> = w.iter().map(|v| v / (n * c)).collect();
        let mut gb = 0.0;
        for (x, &label) in features.iter().zip(labels) {
            let y = if label == OodLabel::Out { 1.0 } else { -1.0 };
            let margin = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            if y * margin < 1.0 {
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g -= y * xi / n;
                }
                gb -= y / n;
            }
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    Ok(standardizer.fold_into(LinearModel { weights: w, bias: b }))
}

/// Trains a logistic regression by full-batch gradient descent on the mean
/// cross-entropy, out samples coded 1. Features are standardized internally
/// and the transform folded back into the returned weights. Deterministic:
/// zero initialization.
pub fn train_logistic(
    features: &[Vec<f64>],
    labels: &[OodLabel],
    lr: f64,
    epochs: usize,
) -> Result<LinearModel> {
    let dim = check_rows(features, labels.len())?;
    if !(lr > 0.0) || epochs == 0 {
        return Err(Error::BadArgument("logistic regression needs lr > 0, epochs >= 1".into()));
    }
    let standardizer = Standardizer::fit(features, dim);
    let features = standardizer.apply(features);
    let n = features.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..epochs {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (x, &label) in features.iter().zip(labels) {
            let target = if label == OodLabel::Out { 1.0 } else { 0.0 };
            let margin = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            let err = (sigmoid(margin) - target) / n;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    Ok(standardizer.fold_into(LinearModel { weights: w, bias: b }))
}

/// Feature vectors with their in/out labels, for neighbor-vote scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledPool {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<OodLabel>,
}

impl LabeledPool {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<OodLabel>) -> Result<Self> {
        check_rows(&features, labels.len())?;
        Ok(LabeledPool { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Method-specific learned parameters of a fitted detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnedState {
    /// Stored training subset for raw-input neighbor distances.
    ImageKnn { subset: Vec<Vec<f64>>, k: usize },
    /// No learned parameters; the threshold alone is calibrated.
    ProbThreshold,
    /// Linear SVM on the classifier logits.
    ScoreSvm { model: LinearModel },
    /// Logistic regression on penultimate features.
    BinaryClassifier { model: LinearModel },
    /// Penultimate-feature pool with in/out labels.
    FeatureKnn { pool: LabeledPool, k: usize },
    /// Temperature and perturbation magnitude.
    Odin { temperature: f64, epsilon: f64 },
    /// Gaussian class model on penultimate features.
    MahalanobisSingle { gaussian: GaussianState },
    /// One Gaussian per hidden layer plus a logistic combiner over the
    /// per-layer minimal distances.
    MahalanobisMulti { layers: Vec<GaussianState>, combiner: LinearModel },
    /// Reconstruction loss of the embedded autoencoder.
    Reconst,
    /// Encoder-code pool with in/out labels.
    AeKnn { pool: LabeledPool, k: usize },
}
