//! Minimal trainable feed-forward networks: the task classifier, the
//! autoencoder, and the variational autoencoder, with exact
//! backpropagation and input-gradient computation.

mod autoencoder;
mod checkpoint;
mod grad;
mod model;
mod train;

pub use autoencoder::{
    elementwise_loss, vae_kl, AutoencoderModel, AutoencoderSpec, LossKind, BCE_CLAMP,
};
pub use checkpoint::{load_autoencoder, load_classifier, save_autoencoder, save_classifier};
pub use grad::{
    ae_loss_and_grads, classifier_loss, classifier_loss_and_grads, vae_loss, vae_loss_and_grads,
    KL_WEIGHT,
    VaeLoss,
};
pub use model::{Activation, ClassifierModel, DenseLayer, ForwardTrace, InputObjective, Mlp};
pub use train::{
    classifier_accuracy, train_autoencoder, train_classifier, train_classifier_with, Optimizer,
    TrainConfig, TrainOutcome, CLASSIFIER_HIDDEN,
};
