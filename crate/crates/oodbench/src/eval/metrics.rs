//! Evaluation metrics: accuracy, AUPRC, and normal-approximation CIs.

use crate::data::OodLabel;
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_std};

/// Fraction of exact prediction/label matches.
pub fn accuracy(predictions: &[OodLabel], labels: &[OodLabel]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: predictions.len() });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Area under the precision-recall curve by step-wise average precision.
///
/// The positive class is out. Samples are cut in descending score order;
/// samples with equal scores enter at one cut together. Each cut adds
/// `precision * (recall - previous recall)`.
pub fn auprc(scores: &[f64], labels: &[OodLabel]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    for s in scores {
        if !s.is_finite() {
            return Err(Error::NotFinite(format!("score {s}")));
        }
    }
    let positives = labels.iter().filter(|&&l| l == OodLabel::Out).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut average_precision = 0.0;
    let mut previous_recall = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            match labels[order[j]] {
                OodLabel::Out => tp += 1,
                OodLabel::In => fp += 1,
            }
            j += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        average_precision += precision * (recall - previous_recall);
        previous_recall = recall;
        i = j;
    }
    Ok(average_precision)
}

/// Mean and 95% half-width under the normal approximation,
/// `1.96 * sample std / sqrt(n)`.
pub fn confidence_interval_95(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues);
    }
    let m = mean(values)?;
    let half_width = 1.96 * sample_std(values)? / (values.len() as f64).sqrt();
    Ok((m, half_width))
}
