//! Fitted detectors: per-method scoring and thresholded prediction.

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSample, OodLabel};
use crate::detect::calibrate;
use crate::detect::spec::DetectorSpec;
use crate::detect::state::{GaussianState, LabeledPool, LearnedState};
use crate::error::{Error, Result};
use crate::nnet::{AutoencoderModel, ClassifierModel, InputObjective};
use crate::numeric::{argmax, k_nearest_indices, kth_nearest_distance, softmax};

/// A calibrated scorer. Scores are oriented higher-is-more-OoD and the
/// decision rule is `out <=> score > threshold`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedDetector {
    pub spec: DetectorSpec,
    pub state: LearnedState,
    pub threshold: f64,
    /// Task classifier, present for classifier-based methods.
    pub classifier: Option<ClassifierModel>,
    /// Auxiliary autoencoder, present for reconstruction/code methods.
    pub autoencoder: Option<AutoencoderModel>,
}

fn sign(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

/// One signed step against the gradient, clamped to the unit cube.
fn perturb(x: &[f64], grad: &[f64], epsilon: f64) -> Vec<f64> {
    x.iter().zip(grad).map(|(&xi, &g)| (xi - epsilon * sign(g)).clamp(0.0, 1.0)).collect()
}

/// `1 - max_j softmax(logits / temperature)_j`.
pub fn confidence_score(clf: &ClassifierModel, temperature: f64, x: &[f64]) -> Result<f64> {
    let probs = softmax(&clf.logits(x)?, temperature)?;
    Ok(1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Confidence score after the ODIN input preprocessing step. With
/// `epsilon = 0` the input is used untouched, so `(T=1, eps=0)` reproduces
/// the plain probability-threshold score exactly.
pub fn odin_score(
    clf: &ClassifierModel,
    temperature: f64,
    epsilon: f64,
    x: &[f64],
) -> Result<f64> {
    if epsilon > 0.0 {
        let logits = clf.logits(x)?;
        let objective =
            InputObjective::NegLogSoftmax { class: argmax(&logits), temperature };
        let grad = clf.input_gradient(x, objective)?;
        confidence_score(clf, temperature, &perturb(x, &grad, epsilon))
    } else {
        confidence_score(clf, temperature, x)
    }
}

/// Penultimate-layer features (the input itself for a linear classifier).
pub fn penultimate_features(clf: &ClassifierModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(clf.forward(x)?.0)
}

fn penultimate_input_gradient(
    clf: &ClassifierModel,
    x: &[f64],
    d_features: &[f64],
) -> Result<Vec<f64>> {
    if clf.n_hidden_layers() == 0 {
        Ok(d_features.to_vec())
    } else {
        clf.input_gradient_from_hidden(x, clf.n_hidden_layers() - 1, d_features)
    }
}

/// Per-layer feature vectors used by the multi-layer Mahalanobis variant:
/// every hidden layer's activations, or the input itself for a linear
/// classifier.
pub fn layer_features(clf: &ClassifierModel, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let hidden = clf.hidden_activations(x)?;
    if hidden.is_empty() {
        Ok(vec![x.to_vec()])
    } else {
        Ok(hidden)
    }
}

fn layer_input_gradient(
    clf: &ClassifierModel,
    x: &[f64],
    layer: usize,
    d_features: &[f64],
) -> Result<Vec<f64>> {
    if clf.n_hidden_layers() == 0 {
        Ok(d_features.to_vec())
    } else {
        clf.input_gradient_from_hidden(x, layer, d_features)
    }
}

/// Minimal Mahalanobis distance on penultimate features, with an optional
/// input perturbation toward decreasing the distance.
pub fn mahalanobis_single_score(
    clf: &ClassifierModel,
    gaussian: &GaussianState,
    x: &[f64],
) -> Result<f64> {
    let features = penultimate_features(clf, x)?;
    if gaussian.epsilon > 0.0 {
        let d_features = gaussian.nearest_distance_gradient(&features)?;
        let d_input = penultimate_input_gradient(clf, x, &d_features)?;
        let moved = perturb(x, &d_input, gaussian.epsilon);
        gaussian.min_distance(&penultimate_features(clf, &moved)?)
    } else {
        gaussian.min_distance(&features)
    }
}

/// Per-layer minimal Mahalanobis distances, each with its own perturbation.
pub fn multi_layer_distances(
    clf: &ClassifierModel,
    layers: &[GaussianState],
    x: &[f64],
) -> Result<Vec<f64>> {
    let features = layer_features(clf, x)?;
    if features.len() != layers.len() {
        return Err(Error::DimensionMismatch { expected: layers.len(), got: features.len() });
    }
    layers
        .iter()
        .enumerate()
        .map(|(l, gaussian)| {
            if gaussian.epsilon > 0.0 {
                let d_features = gaussian.nearest_distance_gradient(&features[l])?;
                let d_input = layer_input_gradient(clf, x, l, &d_features)?;
                let moved = perturb(x, &d_input, gaussian.epsilon);
                gaussian.min_distance(&layer_features(clf, &moved)?[l])
            } else {
                gaussian.min_distance(&features[l])
            }
        })
        .collect()
}

/// Fraction of the `k` nearest pool members labeled out.
pub fn neighbor_vote_score(pool: &LabeledPool, k: usize, query: &[f64]) -> Result<f64> {
    let neighbors = k_nearest_indices(query, &pool.features, k)?;
    let out = neighbors.iter().filter(|(i, _)| pool.labels[*i] == OodLabel::Out).count();
    Ok(out as f64 / k as f64)
}

impl FittedDetector {
    fn classifier(&self) -> Result<&ClassifierModel> {
        self.classifier.as_ref().ok_or_else(|| Error::MissingModel {
            method: self.spec.method.as_str().to_string(),
            model: "classifier".to_string(),
        })
    }

    fn autoencoder(&self) -> Result<&AutoencoderModel> {
        self.autoencoder.as_ref().ok_or_else(|| Error::MissingModel {
            method: self.spec.method.as_str().to_string(),
            model: "autoencoder".to_string(),
        })
    }

    /// OoD score of one input; higher means more out-of-distribution.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match &self.state {
            LearnedState::ImageKnn { subset, k } => kth_nearest_distance(x, subset, *k),
            LearnedState::ProbThreshold => confidence_score(self.classifier()?, 1.0, x),
            LearnedState::ScoreSvm { model } => model.margin(&self.classifier()?.logits(x)?),
            LearnedState::BinaryClassifier { model } => {
                model.probability(&penultimate_features(self.classifier()?, x)?)
            }
            LearnedState::FeatureKnn { pool, k } => {
                neighbor_vote_score(pool, *k, &penultimate_features(self.classifier()?, x)?)
            }
            LearnedState::Odin { temperature, epsilon } => {
                odin_score(self.classifier()?, *temperature, *epsilon, x)
            }
            LearnedState::MahalanobisSingle { gaussian } => {
                mahalanobis_single_score(self.classifier()?, gaussian, x)
            }
            LearnedState::MahalanobisMulti { layers, combiner } => {
                combiner.probability(&multi_layer_distances(self.classifier()?, layers, x)?)
            }
            LearnedState::Reconst => self.autoencoder()?.reconstruction_loss(x),
            LearnedState::AeKnn { pool, k } => {
                neighbor_vote_score(pool, *k, &self.autoencoder()?.encode(x)?)
            }
        }
    }

    /// Scores for a batch of samples, in order.
    pub fn scores_of(&self, samples: &[LabeledSample]) -> Result<Vec<f64>> {
        samples.iter().map(|s| self.score(&s.input)).collect()
    }

    /// Thresholded decision: out exactly when the score exceeds the threshold.
    pub fn predict(&self, x: &[f64]) -> Result<OodLabel> {
        Ok(if self.score(x)? > self.threshold { OodLabel::Out } else { OodLabel::In })
    }

    /// Balanced accuracy of the thresholded rule on labeled samples.
    pub fn balanced_accuracy_on(&self, samples: &[LabeledSample]) -> Result<f64> {
        let scores = self.scores_of(samples)?;
        let labels: Vec<OodLabel> = samples.iter().map(|s| s.ood_label).collect();
        calibrate::balanced_accuracy(&scores, &labels, self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::spec::MethodKind;
    use crate::detect::state::LinearModel;
    use crate::numeric::{CholeskyFactor, Matrix, RngStream};

    fn zeroed_classifier(input_dim: usize, n_classes: usize) -> ClassifierModel {
        let mut rng = RngStream::new(1, 1);
        let mut clf =
            ClassifierModel::init(input_dim, &[], (0..n_classes as i32).collect(), &mut rng);
        let zeros = vec![0.0; clf.mlp.n_params()];
        clf.mlp.read_params(&zeros).unwrap();
        clf
    }

    fn detector(spec: DetectorSpec, state: LearnedState) -> FittedDetector {
        FittedDetector { spec, state, threshold: 0.0, classifier: None, autoencoder: None }
    }

    #[test]
    fn uniform_logits_confidence_score_is_one_minus_inverse_k() {
        let clf = zeroed_classifier(3, 10);
        let det = FittedDetector {
            classifier: Some(clf),
            ..detector(DetectorSpec::new(MethodKind::ProbThreshold), LearnedState::ProbThreshold)
        };
        let s = det.score(&[0.2, 0.5, 0.8]).unwrap();
        assert!((s - 0.9).abs() < 1e-15);
    }

    #[test]
    fn odin_without_perturbation_equals_prob_threshold_exactly() {
        let mut rng = RngStream::new(7, 3);
        let clf = ClassifierModel::init(4, &[6], vec![0, 1, 2], &mut rng);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
            let base = confidence_score(&clf, 1.0, &x).unwrap();
            let odin = odin_score(&clf, 1.0, 0.0, &x).unwrap();
            assert!((base - odin).abs() <= 1e-12);
        }
    }

    #[test]
    fn odin_perturbation_raises_confidence_on_average() {
        let mut rng = RngStream::new(11, 5);
        let clf = ClassifierModel::init(4, &[8], vec![0, 1], &mut rng);
        let mut lowered = 0;
        let n = 100;
        for _ in 0..n {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
            let plain = odin_score(&clf, 1.0, 0.0, &x).unwrap();
            let moved = odin_score(&clf, 1.0, 0.05, &x).unwrap();
            if moved <= plain {
                lowered += 1;
            }
        }
        assert!(lowered > n / 2, "perturbation lowered the score only {lowered}/{n} times");
    }

    #[test]
    fn identity_features_mahalanobis_matches_squared_euclidean() {
        let clf = zeroed_classifier(2, 2);
        let gaussian = GaussianState {
            means: vec![(0, vec![0.0, 0.0])],
            covariance: CholeskyFactor::from_lower(Matrix::identity(2)),
            epsilon: 0.0,
        };
        let det = FittedDetector {
            classifier: Some(clf),
            ..detector(
                DetectorSpec::new(MethodKind::MahalanobisSingle),
                LearnedState::MahalanobisSingle { gaussian },
            )
        };
        assert_eq!(det.score(&[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn mahalanobis_score_ignores_class_order_and_is_nonnegative() {
        let mut rng = RngStream::new(21, 9);
        let clf = ClassifierModel::init(3, &[5], vec![0, 1], &mut rng);
        let make = |order: Vec<(i32, Vec<f64>)>| GaussianState {
            means: order,
            covariance: CholeskyFactor::from_lower(Matrix::identity(5)),
            epsilon: 0.0,
        };
        let a = vec![(0, vec![0.1; 5]), (1, vec![0.9; 5])];
        let b = vec![(1, vec![0.9; 5]), (0, vec![0.1; 5])];
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let sa = mahalanobis_single_score(&clf, &make(a.clone()), &x).unwrap();
            let sb = mahalanobis_single_score(&clf, &make(b.clone()), &x).unwrap();
            assert_eq!(sa, sb);
            assert!(sa >= 0.0);
        }
    }

    #[test]
    fn mahalanobis_is_zero_at_a_class_mean() {
        let clf = zeroed_classifier(2, 2);
        let gaussian = GaussianState {
            means: vec![(0, vec![0.25, 0.75]), (1, vec![0.5, 0.5])],
            covariance: CholeskyFactor::from_lower(Matrix::identity(2)),
            epsilon: 0.0,
        };
        assert_eq!(mahalanobis_single_score(&clf, &gaussian, &[0.25, 0.75]).unwrap(), 0.0);
    }

    #[test]
    fn stored_subset_member_scores_zero_with_one_neighbor() {
        let subset = vec![vec![0.1, 0.2], vec![0.7, 0.9]];
        let det = detector(
            DetectorSpec::new(MethodKind::ImageKnn),
            LearnedState::ImageKnn { subset, k: 1 },
        );
        assert_eq!(det.score(&[0.7, 0.9]).unwrap(), 0.0);
        assert!(det.score(&[0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn neighbor_vote_counts_out_fraction() {
        let pool = LabeledPool::new(
            vec![vec![1.0], vec![1.1], vec![0.9], vec![10.0]],
            vec![OodLabel::Out, OodLabel::Out, OodLabel::In, OodLabel::Out],
        )
        .unwrap();
        let s = neighbor_vote_score(&pool, 3, &[1.0]).unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vote_scores_live_on_the_k_grid() {
        let mut rng = RngStream::new(3, 12);
        let features: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
        let labels: Vec<OodLabel> =
            (0..40).map(|i| if i % 3 == 0 { OodLabel::Out } else { OodLabel::In }).collect();
        let pool = LabeledPool::new(features, labels).unwrap();
        for k in [1usize, 4, 8] {
            for _ in 0..25 {
                let q = vec![rng.uniform(), rng.uniform()];
                let s = neighbor_vote_score(&pool, k, &q).unwrap();
                let scaled = s * k as f64;
                assert!((scaled - scaled.round()).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&s));
            }
        }
    }

    #[test]
    fn svm_state_scores_by_logit_margin() {
        let clf = zeroed_classifier(2, 2);
        // Zeroed classifier gives logits (0, 0); margin reduces to the bias.
        let model = LinearModel { weights: vec![1.0, -1.0], bias: 0.25 };
        let det = FittedDetector {
            classifier: Some(clf),
            ..detector(DetectorSpec::new(MethodKind::ScoreSvm), LearnedState::ScoreSvm { model })
        };
        assert_eq!(det.score(&[0.3, 0.4]).unwrap(), 0.25);
    }

    #[test]
    fn predict_uses_a_strict_inequality_and_is_pure() {
        let det = FittedDetector {
            threshold: 5.0,
            ..detector(
                DetectorSpec::new(MethodKind::ImageKnn),
                LearnedState::ImageKnn { subset: vec![vec![0.0]], k: 1 },
            )
        };
        // Score of x = [5.0] is exactly the threshold.
        assert_eq!(det.predict(&[5.0]).unwrap(), OodLabel::In);
        assert_eq!(det.predict(&[10.1]).unwrap(), OodLabel::Out);
        for _ in 0..5 {
            assert_eq!(det.predict(&[10.1]).unwrap(), OodLabel::Out);
        }
    }

    #[test]
    fn missing_model_is_reported_by_name() {
        let det = detector(DetectorSpec::new(MethodKind::ProbThreshold), LearnedState::ProbThreshold);
        match det.score(&[0.0]) {
            Err(Error::MissingModel { method, model }) => {
                assert_eq!(method, "prob_threshold");
                assert_eq!(model, "classifier");
            }
            other => panic!("expected MissingModel, got {other:?}"),
        }
    }
}
