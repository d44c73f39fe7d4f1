//! Detector fitting: learned-state estimation plus threshold calibration.

use std::collections::BTreeMap;

use crate::data::{LabeledSample, OodLabel};
use crate::detect::calibrate::calibrate_threshold;
use crate::detect::score::{layer_features, multi_layer_distances, penultimate_features, FittedDetector};
use crate::detect::spec::{DetectorSpec, MethodKind};
use crate::detect::state::{
    train_linear_svm, train_logistic, GaussianState, LabeledPool, LearnedState,
};
use crate::error::{Error, Result};
use crate::nnet::{AutoencoderModel, ClassifierModel};
use crate::numeric::RngStream;

/// Cap on the stored training subset for the raw-input KNN method.
pub const IMAGE_KNN_SUBSET_CAP: usize = 1000;

/// The trained models a detector may depend on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub classifier: Option<&'a ClassifierModel>,
    pub autoencoder: Option<&'a AutoencoderModel>,
}

fn missing(method: MethodKind, model: &str) -> Error {
    Error::MissingModel { method: method.as_str().to_string(), model: model.to_string() }
}

fn ensure_both_labels(samples: &[LabeledSample]) -> Result<()> {
    let n_out = samples.iter().filter(|s| s.ood_label == OodLabel::Out).count();
    if n_out == 0 || n_out == samples.len() {
        return Err(Error::SingleClassValidation);
    }
    Ok(())
}

fn labels_of(samples: &[LabeledSample]) -> Vec<OodLabel> {
    samples.iter().map(|s| s.ood_label).collect()
}

fn in_class_features(
    d_tr_sample: &[LabeledSample],
    mut features: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<(i32, Vec<Vec<f64>>)>> {
    let mut groups: BTreeMap<i32, Vec<Vec<f64>>> = BTreeMap::new();
    for s in d_tr_sample.iter().filter(|s| s.ood_label == OodLabel::In) {
        groups.entry(s.task_class).or_default().push(features(&s.input)?);
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(groups.into_iter().collect())
}

fn checked_k(k: usize, pool_len: usize) -> Result<usize> {
    if k == 0 || k > pool_len {
        return Err(Error::PoolTooSmall { k, n: pool_len });
    }
    Ok(k)
}

fn build_state(
    spec: &DetectorSpec,
    classifier: Option<&ClassifierModel>,
    autoencoder: Option<&AutoencoderModel>,
    d_tr_sample: &[LabeledSample],
    val_train: &[LabeledSample],
    rng: &mut RngStream,
) -> Result<LearnedState> {
    match spec.method {
        MethodKind::ImageKnn => {
            if d_tr_sample.is_empty() {
                return Err(Error::EmptyInput);
            }
            let n = d_tr_sample.len().min(IMAGE_KNN_SUBSET_CAP);
            let subset: Vec<Vec<f64>> = if n < d_tr_sample.len() {
                let mut picks = rng.sample_indices(d_tr_sample.len(), n);
                picks.sort_unstable();
                picks.into_iter().map(|i| d_tr_sample[i].input.clone()).collect()
            } else {
                d_tr_sample.iter().map(|s| s.input.clone()).collect()
            };
            Ok(LearnedState::ImageKnn { k: checked_k(spec.k(), subset.len())?, subset })
        }
        MethodKind::ProbThreshold => Ok(LearnedState::ProbThreshold),
        MethodKind::ScoreSvm => {
            let clf = classifier.expect("checked by fit");
            let feats: Vec<Vec<f64>> =
                val_train.iter().map(|s| clf.logits(&s.input)).collect::<Result<_>>()?;
            let model =
                train_linear_svm(&feats, &labels_of(val_train), spec.svm_c(), spec.lr(), spec.epochs())?;
            Ok(LearnedState::ScoreSvm { model })
        }
        MethodKind::BinaryClassifier => {
            let clf = classifier.expect("checked by fit");
            let feats: Vec<Vec<f64>> = val_train
                .iter()
                .map(|s| penultimate_features(clf, &s.input))
                .collect::<Result<_>>()?;
            let model = train_logistic(&feats, &labels_of(val_train), spec.lr(), spec.epochs())?;
            Ok(LearnedState::BinaryClassifier { model })
        }
        MethodKind::FeatureKnn => {
            let clf = classifier.expect("checked by fit");
            let feats: Vec<Vec<f64>> = val_train
                .iter()
                .map(|s| penultimate_features(clf, &s.input))
                .collect::<Result<_>>()?;
            let pool = LabeledPool::new(feats, labels_of(val_train))?;
            Ok(LearnedState::FeatureKnn { k: checked_k(spec.k(), pool.len())?, pool })
        }
        MethodKind::Odin => {
            Ok(LearnedState::Odin { temperature: spec.temperature(), epsilon: spec.epsilon() })
        }
        MethodKind::MahalanobisSingle => {
            let clf = classifier.expect("checked by fit");
            let groups = in_class_features(d_tr_sample, |x| penultimate_features(clf, x))?;
            Ok(LearnedState::MahalanobisSingle {
                gaussian: GaussianState::fit(&groups, spec.epsilon())?,
            })
        }
        MethodKind::MahalanobisMulti => {
            let clf = classifier.expect("checked by fit");
            let n_layers = layer_features(clf, &d_tr_sample[0].input)?.len();
            let mut layer_groups: Vec<BTreeMap<i32, Vec<Vec<f64>>>> =
                vec![BTreeMap::new(); n_layers];
            for s in d_tr_sample.iter().filter(|s| s.ood_label == OodLabel::In) {
                for (l, f) in layer_features(clf, &s.input)?.into_iter().enumerate() {
                    layer_groups[l].entry(s.task_class).or_default().push(f);
                }
            }
            let layers: Vec<GaussianState> = layer_groups
                .into_iter()
                .map(|g| GaussianState::fit(&g.into_iter().collect::<Vec<_>>(), spec.epsilon()))
                .collect::<Result<_>>()?;
            let dists: Vec<Vec<f64>> = val_train
                .iter()
                .map(|s| multi_layer_distances(clf, &layers, &s.input))
                .collect::<Result<_>>()?;
            let combiner = train_logistic(&dists, &labels_of(val_train), spec.lr(), spec.epochs())?;
            Ok(LearnedState::MahalanobisMulti { layers, combiner })
        }
        MethodKind::ReconstAeMse
        | MethodKind::ReconstAeBce
        | MethodKind::ReconstVaeMse
        | MethodKind::ReconstVaeBce => Ok(LearnedState::Reconst),
        MethodKind::AeKnn => {
            let ae = autoencoder.expect("checked by fit");
            let codes: Vec<Vec<f64>> =
                val_train.iter().map(|s| ae.encode(&s.input)).collect::<Result<_>>()?;
            let pool = LabeledPool::new(codes, labels_of(val_train))?;
            Ok(LearnedState::AeKnn { k: checked_k(spec.k(), pool.len())?, pool })
        }
    }
}

/// Fits a detector: estimates its learned state from the training sample
/// and the validation fit split, then calibrates the decision threshold on
/// the calibration split.
pub fn fit(
    spec: &DetectorSpec,
    models: &Models,
    d_tr_sample: &[LabeledSample],
    val_train: &[LabeledSample],
    val_calib: &[LabeledSample],
    rng: &mut RngStream,
) -> Result<FittedDetector> {
    spec.validate()?;
    ensure_both_labels(val_train)?;
    ensure_both_labels(val_calib)?;

    let classifier = if spec.method.requires_classifier() {
        Some(models.classifier.ok_or_else(|| missing(spec.method, "classifier"))?.clone())
    } else {
        None
    };
    let autoencoder = match spec.method.autoencoder_flavor() {
        Some((variational, loss_kind)) => {
            let ae = models.autoencoder.ok_or_else(|| missing(spec.method, "autoencoder"))?;
            if ae.variational != variational || ae.loss_kind != loss_kind {
                return Err(Error::BadArgument(format!(
                    "{} needs variational={} loss={}, got variational={} loss={}",
                    spec.method,
                    variational,
                    loss_kind.as_str(),
                    ae.variational,
                    ae.loss_kind.as_str(),
                )));
            }
            Some(ae.clone())
        }
        None => None,
    };

    let state = build_state(
        spec,
        classifier.as_ref(),
        autoencoder.as_ref(),
        d_tr_sample,
        val_train,
        rng,
    )?;
    let mut detector =
        FittedDetector { spec: spec.clone(), state, threshold: 0.0, classifier, autoencoder };
    let scores = detector.scores_of(val_calib)?;
    detector.threshold = calibrate_threshold(&scores, &labels_of(val_calib))?;
    Ok(detector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::calibrate::{balanced_accuracy, threshold_candidates};
    use crate::detect::spec::HP_EPSILON;
    use crate::nnet::{AutoencoderSpec, LossKind};

    fn sample(uid: u64, input: Vec<f64>, class: i32, label: OodLabel) -> LabeledSample {
        LabeledSample::new(uid, input, class, "test", label).unwrap()
    }

    // In points cluster near 0.2, out points near 0.8, separable in one axis.
    fn separated_val(n_each: usize, base_uid: u64) -> Vec<LabeledSample> {
        let mut v = Vec::new();
        for i in 0..n_each {
            let jitter = i as f64 * 0.004;
            v.push(sample(base_uid + 2 * i as u64, vec![0.2 + jitter, 0.5], 0, OodLabel::In));
            v.push(sample(base_uid + 2 * i as u64 + 1, vec![0.8 - jitter, 0.5], -1, OodLabel::Out));
        }
        v
    }

    fn training_blobs(n_each: usize) -> Vec<LabeledSample> {
        let mut rng = RngStream::new(99, 4);
        let mut v = Vec::new();
        for i in 0..n_each {
            let a = 0.15 + 0.1 * rng.uniform();
            v.push(sample(5000 + 2 * i as u64, vec![a, 0.4], 0, OodLabel::In));
            let b = 0.25 + 0.1 * rng.uniform();
            v.push(sample(5001 + 2 * i as u64, vec![b, 0.6], 1, OodLabel::In));
        }
        v
    }

    fn linear_classifier() -> ClassifierModel {
        let mut rng = RngStream::new(41, 2);
        ClassifierModel::init(2, &[], vec![0, 1], &mut rng)
    }

    #[test]
    fn image_knn_stores_at_most_the_cap() {
        let mut rng = RngStream::new(5, 5);
        let big: Vec<LabeledSample> = (0..1200)
            .map(|i| sample(i, vec![rng.uniform(), rng.uniform()], 0, OodLabel::In))
            .collect();
        let val = separated_val(10, 10_000);
        let spec = DetectorSpec::new(MethodKind::ImageKnn);
        let det =
            fit(&spec, &Models::default(), &big, &val, &val, &mut RngStream::new(5, 6)).unwrap();
        match &det.state {
            LearnedState::ImageKnn { subset, k } => {
                assert_eq!(subset.len(), 1000);
                assert_eq!(*k, 8);
            }
            other => panic!("unexpected state {other:?}"),
        }
        let small = &big[..50];
        let det =
            fit(&spec, &Models::default(), small, &val, &val, &mut RngStream::new(5, 7)).unwrap();
        match &det.state {
            LearnedState::ImageKnn { subset, .. } => assert_eq!(subset.len(), 50),
            other => panic!("unexpected state {other:?}"),
        }
    }

    #[test]
    fn prob_threshold_keeps_no_learned_parameters() {
        let clf = linear_classifier();
        let models = Models { classifier: Some(&clf), autoencoder: None };
        let val = separated_val(10, 0);
        let spec = DetectorSpec::new(MethodKind::ProbThreshold);
        let det = fit(&spec, &models, &[], &val, &val, &mut RngStream::new(1, 1)).unwrap();
        assert!(matches!(det.state, LearnedState::ProbThreshold));
        assert!(det.threshold.is_finite());
    }

    #[test]
    fn binary_classifier_separates_separated_features_perfectly() {
        let clf = linear_classifier();
        let models = Models { classifier: Some(&clf), autoencoder: None };
        let val = separated_val(20, 0);
        let spec = DetectorSpec::new(MethodKind::BinaryClassifier);
        let det = fit(&spec, &models, &[], &val, &val, &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(det.balanced_accuracy_on(&val).unwrap(), 1.0);

        // Exhaustive threshold search cannot do better than the calibrated rule.
        let scores = det.scores_of(&val).unwrap();
        let labels: Vec<OodLabel> = val.iter().map(|s| s.ood_label).collect();
        let best = threshold_candidates(&scores)
            .into_iter()
            .map(|t| balanced_accuracy(&scores, &labels, t).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn mahalanobis_multi_builds_one_gaussian_per_layer() {
        let mut rng = RngStream::new(17, 1);
        let clf = ClassifierModel::init(2, &[6, 4], vec![0, 1], &mut rng);
        let models = Models { classifier: Some(&clf), autoencoder: None };
        let d_tr = training_blobs(30);
        let val = separated_val(15, 20_000);
        let spec = DetectorSpec::new(MethodKind::MahalanobisMulti).with(HP_EPSILON, 0.001);
        let det = fit(&spec, &models, &d_tr, &val, &val, &mut RngStream::new(2, 2)).unwrap();
        match &det.state {
            LearnedState::MahalanobisMulti { layers, combiner } => {
                assert_eq!(layers.len(), 2);
                assert_eq!(combiner.weights.len(), 2);
                assert!(layers.iter().all(|g| g.epsilon == 0.001));
            }
            other => panic!("unexpected state {other:?}"),
        }
        let probe = [0.3, 0.5];
        assert!(det.score(&probe).unwrap().is_finite());
    }

    #[test]
    fn missing_models_and_flavor_mismatches_are_rejected() {
        let val = separated_val(5, 0);
        let spec = DetectorSpec::new(MethodKind::Odin);
        let err = fit(&spec, &Models::default(), &[], &val, &val, &mut RngStream::new(1, 3));
        assert!(matches!(err, Err(Error::MissingModel { .. })));

        let mut rng = RngStream::new(4, 4);
        let arch = AutoencoderSpec::default_for(2, false, LossKind::Mse);
        let ae = AutoencoderModel::init(2, &arch, &mut rng).unwrap();
        let models = Models { classifier: None, autoencoder: Some(&ae) };
        let spec = DetectorSpec::new(MethodKind::ReconstVaeBce);
        let err = fit(&spec, &models, &[], &val, &val, &mut RngStream::new(1, 4));
        assert!(matches!(err, Err(Error::BadArgument(_))));
    }

    #[test]
    fn single_class_validation_split_is_rejected() {
        let all_in: Vec<LabeledSample> =
            (0..10).map(|i| sample(i, vec![0.1, 0.2], 0, OodLabel::In)).collect();
        let spec = DetectorSpec::new(MethodKind::ImageKnn);
        let err = fit(&spec, &Models::default(), &all_in, &all_in, &all_in, &mut RngStream::new(1, 5));
        assert!(matches!(err, Err(Error::SingleClassValidation)));
    }

    #[test]
    fn fitting_is_deterministic_given_the_rng() {
        let mut rng = RngStream::new(31, 8);
        let d_tr: Vec<LabeledSample> = (0..1100)
            .map(|i| sample(i, vec![rng.uniform(), rng.uniform()], 0, OodLabel::In))
            .collect();
        let val = separated_val(12, 40_000);
        let spec = DetectorSpec::new(MethodKind::ImageKnn);
        let a = fit(&spec, &Models::default(), &d_tr, &val, &val, &mut RngStream::new(9, 9)).unwrap();
        let b = fit(&spec, &Models::default(), &d_tr, &val, &val, &mut RngStream::new(9, 9)).unwrap();
        assert_eq!(a.threshold, b.threshold);
        let probe = [0.33, 0.77];
        assert_eq!(a.score(&probe).unwrap(), b.score(&probe).unwrap());
    }

    #[test]
    fn ae_knn_pools_encoder_codes() {
        let mut rng = RngStream::new(12, 6);
        let arch = AutoencoderSpec { hidden: vec![4], bottleneck: 1, variational: false, loss_kind: LossKind::Mse };
        let ae = AutoencoderModel::init(2, &arch, &mut rng).unwrap();
        let models = Models { classifier: None, autoencoder: Some(&ae) };
        let val = separated_val(10, 0);
        let spec = DetectorSpec::new(MethodKind::AeKnn).with("k", 4.0);
        let det = fit(&spec, &models, &[], &val, &val, &mut RngStream::new(3, 3)).unwrap();
        match &det.state {
            LearnedState::AeKnn { pool, k } => {
                assert_eq!(*k, 4);
                assert_eq!(pool.len(), 20);
                assert_eq!(pool.features[0].len(), 1);
            }
            other => panic!("unexpected state {other:?}"),
        }
    }
}
