//! Decision-threshold calibration by balanced-accuracy maximization.

use crate::data::OodLabel;
use crate::error::{Error, Result};

fn check_scores_labels(scores: &[f64], labels: &[OodLabel]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    for s in scores {
        if !s.is_finite() {
            return Err(Error::NotFinite(format!("score {s}")));
        }
    }
    let n_out = labels.iter().filter(|&&l| l == OodLabel::Out).count();
    if n_out == 0 || n_out == labels.len() {
        return Err(Error::SingleClassValidation);
    }
    Ok(())
}

fn balanced_accuracy_unchecked(scores: &[f64], labels: &[OodLabel], threshold: f64) -> f64 {
    let (mut tp, mut n_out, mut tn, mut n_in) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        let out = s > threshold;
        match l {
            OodLabel::Out => {
                n_out += 1;
                tp += out as usize;
            }
            OodLabel::In => {
                n_in += 1;
                tn += !out as usize;
            }
        }
    }
    0.5 * (tp as f64 / n_out as f64 + tn as f64 / n_in as f64)
}

/// Balanced accuracy of the rule `out <=> score > threshold`: the mean of
/// the out recall and the in recall.
pub fn balanced_accuracy(scores: &[f64], labels: &[OodLabel], threshold: f64) -> Result<f64> {
    check_scores_labels(scores, labels)?;
    Ok(balanced_accuracy_unchecked(scores, labels, threshold))
}

/// All candidate thresholds in increasing order: one sentinel below the
/// minimum score, the midpoints between consecutive distinct scores, and
/// one sentinel above the maximum.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut uniq = scores.to_vec();
    uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uniq.dedup();
    let mut candidates = Vec::with_capacity(uniq.len() + 1);
    candidates.push(uniq[0] - 1.0);
    for pair in uniq.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(uniq[uniq.len() - 1] + 1.0);
    candidates
}

/// Picks the threshold maximizing balanced accuracy of `out <=> score >
/// threshold` over the candidate set; ties go to the smallest threshold.
pub fn calibrate_threshold(scores: &[f64], labels: &[OodLabel]) -> Result<f64> {
    check_scores_labels(scores, labels)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_threshold = 0.0;
    for t in threshold_candidates(scores) {
        let acc = balanced_accuracy_unchecked(scores, labels, t);
        if acc > best {
            best = acc;
            best_threshold = t;
        }
    }
    Ok(best_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    const IN: OodLabel = OodLabel::In;
    const OUT: OodLabel = OodLabel::Out;

    #[test]
    fn separable_scores_reach_balanced_accuracy_one() {
        let scores = [1.0, 2.0, 5.0, 6.0];
        let labels = [IN, IN, OUT, OUT];
        let t = calibrate_threshold(&scores, &labels).unwrap();
        assert!(t > 2.0 && t < 5.0, "threshold {t} outside the separating gap");
        assert_eq!(balanced_accuracy(&scores, &labels, t).unwrap(), 1.0);
    }

    #[test]
    fn identical_scores_fall_back_to_the_below_min_sentinel() {
        let scores = [3.0, 3.0, 3.0, 3.0];
        let labels = [IN, OUT, IN, OUT];
        let t = calibrate_threshold(&scores, &labels).unwrap();
        assert_eq!(t, 2.0);
        assert_eq!(balanced_accuracy(&scores, &labels, t).unwrap(), 0.5);
    }

    #[test]
    fn ties_resolve_to_the_smallest_threshold() {
        // Both the gap (1,2) and the gap (3,4) separate one extra out sample;
        // accuracy is equal, so the smaller midpoint must win.
        let scores = [1.0, 2.0, 3.0, 4.0];
        let labels = [IN, OUT, IN, OUT];
        let t = calibrate_threshold(&scores, &labels).unwrap();
        assert_eq!(t, 1.5);
    }

    // Brute force over every cut position of the sorted score list.
    fn oracle_best_balanced_accuracy(scores: &[f64], labels: &[OodLabel]) -> f64 {
        let mut cuts: Vec<f64> = scores.to_vec();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut thresholds = vec![cuts[0] - 1.0, cuts[cuts.len() - 1] + 1.0];
        thresholds.extend(cuts.iter().copied());
        for pair in cuts.windows(2) {
            thresholds.push(0.5 * (pair[0] + pair[1]));
        }
        thresholds
            .into_iter()
            .map(|t| balanced_accuracy(scores, labels, t).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn calibration_matches_brute_force_on_random_instances() {
        let mut rng = RngStream::new(2024, 77);
        for _ in 0..200 {
            let n = 2 + rng.below(19);
            let mut scores: Vec<f64> = (0..n).map(|_| (rng.below(8) as f64) * 0.5).collect();
            let mut labels: Vec<OodLabel> =
                (0..n).map(|_| if rng.below(2) == 0 { IN } else { OUT }).collect();
            // Force both classes.
            labels[0] = IN;
            scores[0] = 0.25;
            if !labels.contains(&OUT) {
                labels[n - 1] = OUT;
            }
            let t = calibrate_threshold(&scores, &labels).unwrap();
            let achieved = balanced_accuracy(&scores, &labels, t).unwrap();
            let oracle = oracle_best_balanced_accuracy(&scores, &labels);
            assert_eq!(achieved, oracle, "scores {scores:?} labels {labels:?}");
            assert!(achieved >= 0.5);
        }
    }

    #[test]
    fn monotone_transformation_preserves_the_decision_rule() {
        let mut rng = RngStream::new(55, 3);
        let scores: Vec<f64> = (0..30).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let labels: Vec<OodLabel> =
            (0..30).map(|i| if i % 3 == 0 { OUT } else { IN }).collect();
        let t = calibrate_threshold(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| s.exp() + 3.0 * s).collect();
        let mt = calibrate_threshold(&mapped, &labels).unwrap();
        for (&s, &m) in scores.iter().zip(&mapped) {
            assert_eq!(s > t, m > mt);
        }
    }

    #[test]
    fn single_class_and_non_finite_inputs_are_rejected() {
        assert!(matches!(
            calibrate_threshold(&[1.0, 2.0], &[IN, IN]),
            Err(Error::SingleClassValidation)
        ));
        assert!(calibrate_threshold(&[f64::NAN, 2.0], &[IN, OUT]).is_err());
        assert!(calibrate_threshold(&[], &[]).is_err());
    }
}
