//! Versioned JSON persistence for fitted detectors.
//!
//! Finite `f64` values survive the round trip bit-exactly, so a reloaded
//! detector scores identically to the one that was saved.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::score::FittedDetector;
use crate::error::{Error, Result};

const DETECTOR_FORMAT: &str = "oodbench.detector.v1";

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    detector: FittedDetector,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn save_detector(path: impl AsRef<Path>, detector: &FittedDetector) -> Result<()> {
    let path = path.as_ref();
    let container = Container { format: DETECTOR_FORMAT.to_string(), detector: detector.clone() };
    let json = serde_json::to_string(&container)
        .map_err(|e| Error::BadArgument(format!("unserializable detector: {e}")))?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn load_detector(path: impl AsRef<Path>) -> Result<FittedDetector> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let container: Container = serde_json::from_str(&json).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    if container.format != DETECTOR_FORMAT {
        return Err(Error::Schema {
            path: path.display().to_string(),
            location: "format".into(),
            message: format!("expected {DETECTOR_FORMAT:?}, found {:?}", container.format),
        });
    }
    if !container.detector.threshold.is_finite() {
        return Err(Error::Schema {
            path: path.display().to_string(),
            location: "threshold".into(),
            message: "non-finite threshold".into(),
        });
    }
    Ok(container.detector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledSample, OodLabel};
    use crate::detect::fit::{fit, Models};
    use crate::detect::spec::{DetectorSpec, MethodKind, HP_EPSILON};
    use crate::nnet::ClassifierModel;
    use crate::numeric::RngStream;

    fn fitted_detector(method: MethodKind) -> (FittedDetector, Vec<Vec<f64>>) {
        let mut rng = RngStream::new(600, 1);
        let clf = ClassifierModel::init(3, &[6, 4], vec![0, 1], &mut rng);
        let d_tr: Vec<LabeledSample> = (0..60)
            .map(|i| {
                let c = (i % 2) as i32;
                let x: Vec<f64> =
                    (0..3).map(|_| (0.3 + 0.4 * c as f64 + 0.1 * rng.uniform()).clamp(0.0, 1.0)).collect();
                LabeledSample::new(i, x, c, "tr", OodLabel::In).unwrap()
            })
            .collect();
        let val: Vec<LabeledSample> = (0..40)
            .map(|i| {
                let out = i % 2 == 1;
                let center = if out { 0.9 } else { 0.35 };
                let x: Vec<f64> = (0..3).map(|_| (center + 0.05 * rng.uniform()).clamp(0.0, 1.0)).collect();
                let label = if out { OodLabel::Out } else { OodLabel::In };
                LabeledSample::new(1000 + i, x, if out { -1 } else { 0 }, "val", label).unwrap()
            })
            .collect();
        let spec = if method == MethodKind::MahalanobisMulti {
            DetectorSpec::new(method).with(HP_EPSILON, 0.005)
        } else {
            DetectorSpec::new(method)
        };
        let models = Models { classifier: Some(&clf), autoencoder: None };
        let det = fit(&spec, &models, &d_tr, &val, &val, &mut RngStream::new(601, 2)).unwrap();
        let probes: Vec<Vec<f64>> =
            (0..10).map(|_| (0..3).map(|_| rng.uniform()).collect()).collect();
        (det, probes)
    }

    #[test]
    fn roundtrip_scores_bit_exactly() {
        for method in [MethodKind::ScoreSvm, MethodKind::MahalanobisMulti, MethodKind::FeatureKnn] {
            let (det, probes) = fitted_detector(method);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("det.json");
            save_detector(&path, &det).unwrap();
            let back = load_detector(&path).unwrap();
            assert_eq!(det.threshold, back.threshold);
            assert_eq!(det.spec, back.spec);
            for p in &probes {
                assert_eq!(det.score(p).unwrap(), back.score(p).unwrap(), "{method}");
                assert_eq!(det.predict(p).unwrap(), back.predict(p).unwrap());
            }
        }
    }

    #[test]
    fn wrong_format_and_missing_file_are_rejected() {
        let (det, _) = fitted_detector(MethodKind::ScoreSvm);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.json");
        save_detector(&path, &det).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("oodbench.detector.v1", "oodbench.detector.v9");
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(load_detector(&path), Err(Error::Schema { .. })));
        assert!(matches!(load_detector(dir.path().join("absent.json")), Err(Error::Io { .. })));
    }
}
