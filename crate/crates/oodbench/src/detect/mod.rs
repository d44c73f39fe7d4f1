//! OoDD methods behind one fit/score/predict abstraction.
//!
//! Every method produces scores oriented higher-is-more-OoD and shares one
//! calibration rule: the decision threshold maximizes balanced accuracy on
//! a labeled calibration split, with `out <=> score > threshold`.

pub mod calibrate;
pub mod fit;
pub mod score;
pub mod spec;
pub mod state;

mod serialize;

pub use calibrate::{balanced_accuracy, calibrate_threshold, threshold_candidates};
pub use fit::{fit, Models, IMAGE_KNN_SUBSET_CAP};
pub use score::{
    confidence_score, layer_features, mahalanobis_single_score, multi_layer_distances,
    neighbor_vote_score, odin_score, penultimate_features, FittedDetector,
};
pub use serialize::{load_detector, save_detector};
pub use spec::{
    DetectorSpec, MethodKind, DEFAULT_K, HP_EPOCHS, HP_EPSILON, HP_K, HP_LR, HP_SVM_C,
    HP_TEMPERATURE,
};
pub use state::{
    train_linear_svm, train_logistic, GaussianState, LabeledPool, LearnedState, LinearModel,
};
