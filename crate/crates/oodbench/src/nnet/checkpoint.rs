//! Versioned JSON checkpoints for trained models.
//!
//! JSON round-trips every finite `f64` bit-exactly (shortest-representation
//! printing), so save → load reproduces parameters exactly.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::autoencoder::AutoencoderModel;
use crate::nnet::model::{ClassifierModel, Mlp};

const CLASSIFIER_FORMAT: &str = "oodbench.classifier.v1";
const AUTOENCODER_FORMAT: &str = "oodbench.autoencoder.v1";

#[derive(Serialize, Deserialize)]
struct Container<M> {
    format: String,
    model: M,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn save<M: Serialize>(path: &Path, format: &str, model: &M) -> Result<()> {
    let container = Container { format: format.to_string(), model };
    let json = serde_json::to_string(&container)
        .map_err(|e| Error::BadArgument(format!("unserializable model: {e}")))?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

fn load<M: DeserializeOwned>(path: &Path, format: &str) -> Result<M> {
    let json = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let container: Container<M> = serde_json::from_str(&json).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    if container.format != format {
        return Err(Error::Schema {
            path: path.display().to_string(),
            location: "format".into(),
            message: format!("expected {format:?}, found {:?}", container.format),
        });
    }
    Ok(container.model)
}

fn check_finite(path: &Path, mlps: &[&Mlp]) -> Result<()> {
    for mlp in mlps {
        let mut params = Vec::new();
        mlp.write_params(&mut params);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema {
                path: path.display().to_string(),
                location: "parameters".into(),
                message: "non-finite parameter".into(),
            });
        }
    }
    Ok(())
}

pub fn save_classifier(path: impl AsRef<Path>, model: &ClassifierModel) -> Result<()> {
    save(path.as_ref(), CLASSIFIER_FORMAT, model)
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let path = path.as_ref();
    let model: ClassifierModel = load(path, CLASSIFIER_FORMAT)?;
    check_finite(path, &[&model.mlp])?;
    Ok(model)
}

pub fn save_autoencoder(path: impl AsRef<Path>, model: &AutoencoderModel) -> Result<()> {
    save(path.as_ref(), AUTOENCODER_FORMAT, model)
}

pub fn load_autoencoder(path: impl AsRef<Path>) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let model: AutoencoderModel = load(path, AUTOENCODER_FORMAT)?;
    check_finite(path, &[&model.encoder, &model.decoder])?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::autoencoder::{AutoencoderSpec, LossKind};
    use crate::numeric::RngStream;

    #[test]
    fn classifier_roundtrip_is_bit_exact() {
        let mut rng = RngStream::new(70, 0);
        let model = ClassifierModel::init(5, &[7, 3], vec![2, 5, 9], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        save_classifier(&path, &model).unwrap();
        let back = load_classifier(&path).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        model.mlp.write_params(&mut a);
        back.mlp.write_params(&mut b);
        assert_eq!(a, b);
        assert_eq!(model.classes, back.classes);
    }

    #[test]
    fn autoencoder_roundtrip_is_bit_exact() {
        let mut rng = RngStream::new(71, 0);
        let spec = AutoencoderSpec {
            hidden: vec![6],
            bottleneck: 2,
            variational: true,
            loss_kind: LossKind::Bce,
        };
        let model = AutoencoderModel::init(4, &spec, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.json");
        save_autoencoder(&path, &model).unwrap();
        let back = load_autoencoder(&path).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        model.encoder.write_params(&mut a);
        model.decoder.write_params(&mut a);
        back.encoder.write_params(&mut b);
        back.decoder.write_params(&mut b);
        assert_eq!(a, b);
        assert_eq!(back.loss_kind, LossKind::Bce);
        assert!(back.variational);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let mut rng = RngStream::new(72, 0);
        let model = ClassifierModel::init(3, &[4], vec![0, 1], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        save_classifier(&path, &model).unwrap();
        assert!(matches!(load_autoencoder(&path), Err(Error::Schema { .. })));
        assert!(matches!(load_classifier(dir.path().join("nope.json")), Err(Error::Io { .. })));
    }
}
