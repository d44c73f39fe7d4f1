//! Split, balance, and partition-assembly operations.
//!
//! All shuffling is driven by an [`RngStream`], so every split is
//! reproducible from `(seed, stream_id)` alone.

use crate::data::{LabeledSample, Partition};
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Randomly splits in-distribution samples three ways.
///
/// Sizes are `floor(fraction * N)` per split with the remainder going to the
/// first split (`d_tr`).
pub fn split_in_data(
    samples: &[LabeledSample],
    fractions: (f64, f64, f64),
    rng: &mut RngStream,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>, Vec<LabeledSample>)> {
    let (ftr, fval, ftest) = fractions;
    if !(ftr > 0.0 && fval > 0.0 && ftest > 0.0) || (ftr + fval + ftest - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions(ftr, fval, ftest));
    }
    if samples.len() < 10 {
        return Err(Error::TooFewSamples { need: 10, got: samples.len() });
    }
    let n = samples.len();
    let n_val = (fval * n as f64).floor() as usize;
    let n_test = (ftest * n as f64).floor() as usize;
    let n_tr = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let pick = |slice: &[usize]| slice.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..n_tr]),
        pick(&order[n_tr..n_tr + n_val]),
        pick(&order[n_tr + n_val..]),
    ))
}

/// Out-partition assignment mode for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssembleMode {
    /// Draw `n_val_partitions` validation partitions without replacement.
    Sample { n_val_partitions: usize },
    /// Use partition `i` for validation and the rest for test.
    EnumerateIndex(usize),
}

/// Validation/test out-data produced by [`assemble_split`].
#[derive(Debug, Clone)]
pub struct AssembledOut {
    pub d_val_out: Vec<LabeledSample>,
    pub d_test_out: Vec<LabeledSample>,
    pub val_partition_names: Vec<String>,
    pub test_partition_names: Vec<String>,
}

/// Splits a partition roster into validation and test sides.
///
/// The two sides are disjoint at partition granularity and cover the roster.
pub fn assemble_split(
    partitions: &[&Partition],
    mode: AssembleMode,
    rng: &mut RngStream,
) -> Result<AssembledOut> {
    if partitions.is_empty() {
        return Err(Error::BadPartitionCount("empty partition roster".into()));
    }
    let val_idx: Vec<usize> = match mode {
        AssembleMode::Sample { n_val_partitions } => {
            if n_val_partitions == 0 || n_val_partitions >= partitions.len() {
                return Err(Error::BadPartitionCount(format!(
                    "need 1 <= n_val_partitions < {}, got {}",
                    partitions.len(),
                    n_val_partitions
                )));
            }
            let mut picked = rng.sample_indices(partitions.len(), n_val_partitions);
            picked.sort_unstable();
            picked
        }
        AssembleMode::EnumerateIndex(i) => {
            if i >= partitions.len() {
                return Err(Error::BadPartitionCount(format!(
                    "enumerate index {i} out of range for {} partitions",
                    partitions.len()
                )));
            }
            vec![i]
        }
    };

    let mut out = AssembledOut {
        d_val_out: Vec::new(),
        d_test_out: Vec::new(),
        val_partition_names: Vec::new(),
        test_partition_names: Vec::new(),
    };
    for (i, p) in partitions.iter().enumerate() {
        if val_idx.binary_search(&i).is_ok() {
            out.d_val_out.extend(p.samples.iter().cloned());
            out.val_partition_names.push(p.name.clone());
        } else {
            out.d_test_out.extend(p.samples.iter().cloned());
            out.test_partition_names.push(p.name.clone());
        }
    }
    Ok(out)
}

/// Splits every partition in half, validation half first; odd sample goes to
/// the validation half.
pub fn split_each_partition_half(
    partitions: &[&Partition],
    rng: &mut RngStream,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let mut val = Vec::new();
    let mut test = Vec::new();
    for p in partitions {
        if p.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: p.len() });
        }
        let mut order: Vec<usize> = (0..p.len()).collect();
        rng.shuffle(&mut order);
        let n_val = p.len() - p.len() / 2;
        val.extend(order[..n_val].iter().map(|&i| p.samples[i].clone()));
        test.extend(order[n_val..].iter().map(|&i| p.samples[i].clone()));
    }
    Ok((val, test))
}

/// Subsamples both sides to `min(|in|, |out|)`, uniformly without replacement.
pub fn balance(
    in_samples: &[LabeledSample],
    out_samples: &[LabeledSample],
    rng: &mut RngStream,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if in_samples.is_empty() || out_samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = in_samples.len().min(out_samples.len());
    let pick = |samples: &[LabeledSample], rng: &mut RngStream| {
        rng.sample_indices(samples.len(), n)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect::<Vec<_>>()
    };
    Ok((pick(in_samples, rng), pick(out_samples, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{OodLabel, UseCase};

    fn in_samples(n: usize) -> Vec<LabeledSample> {
        (0..n)
            .map(|i| {
                LabeledSample::new(i as u64, vec![i as f64 / n as f64], 0, "in", OodLabel::In)
                    .unwrap()
            })
            .collect()
    }

    fn out_partition(name: &str, start_uid: u64, n: usize) -> Partition {
        let samples = (0..n)
            .map(|i| {
                LabeledSample::new(start_uid + i as u64, vec![0.9], -1, name, OodLabel::Out)
                    .unwrap()
            })
            .collect();
        Partition::new(name, UseCase::Uc1, samples).unwrap()
    }

    fn uids(samples: &[LabeledSample]) -> Vec<u64> {
        let mut v: Vec<u64> = samples.iter().map(|s| s.uid).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn split_exact_division() {
        let mut rng = RngStream::new(0, 0);
        let (tr, val, test) =
            split_in_data(&in_samples(100), (0.8, 0.1, 0.1), &mut rng).unwrap();
        assert_eq!((tr.len(), val.len(), test.len()), (80, 10, 10));
    }

    #[test]
    fn split_remainder_goes_to_training() {
        let mut rng = RngStream::new(0, 0);
        let (tr, val, test) =
            split_in_data(&in_samples(101), (0.8, 0.1, 0.1), &mut rng).unwrap();
        assert_eq!((tr.len(), val.len(), test.len()), (81, 10, 10));
    }

    #[test]
    fn split_is_disjoint_cover() {
        let samples = in_samples(57);
        let mut rng = RngStream::new(4, 2);
        let (tr, val, test) = split_in_data(&samples, (0.6, 0.2, 0.2), &mut rng).unwrap();
        let mut all = uids(&tr);
        all.extend(uids(&val));
        all.extend(uids(&test));
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<u64>>());
    }

    #[test]
    fn split_determinism_contract() {
        let samples = in_samples(40);
        let run = |seed| {
            let mut rng = RngStream::new(seed, 0);
            let (tr, ..) = split_in_data(&samples, (0.5, 0.25, 0.25), &mut rng).unwrap();
            uids(&tr)
        };
        assert_eq!(run(1), run(1));
        let mut rng_a = RngStream::new(1, 0);
        let mut rng_b = RngStream::new(2, 0);
        let a = split_in_data(&samples, (0.5, 0.25, 0.25), &mut rng_a).unwrap();
        let b = split_in_data(&samples, (0.5, 0.25, 0.25), &mut rng_b).unwrap();
        let order_a: Vec<u64> = a.0.iter().map(|s| s.uid).collect();
        let order_b: Vec<u64> = b.0.iter().map(|s| s.uid).collect();
        assert_ne!(order_a, order_b);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            split_in_data(&in_samples(20), (0.5, 0.2, 0.2), &mut rng),
            Err(Error::BadFractions(..))
        ));
        assert!(matches!(
            split_in_data(&in_samples(5), (0.8, 0.1, 0.1), &mut rng),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn assemble_sample_mode_counts() {
        let parts: Vec<Partition> =
            (0..14).map(|i| out_partition(&format!("p{i}"), 1000 + 10 * i as u64, 4)).collect();
        let refs: Vec<&Partition> = parts.iter().collect();
        let mut rng = RngStream::new(3, 0);
        let got =
            assemble_split(&refs, AssembleMode::Sample { n_val_partitions: 3 }, &mut rng).unwrap();
        assert_eq!(got.val_partition_names.len(), 3);
        assert_eq!(got.test_partition_names.len(), 11);
        assert_eq!(got.d_val_out.len(), 12);
        assert_eq!(got.d_test_out.len(), 44);
        for name in &got.val_partition_names {
            assert!(!got.test_partition_names.contains(name));
        }
    }

    #[test]
    fn assemble_enumerate_mode() {
        let parts: Vec<Partition> =
            (0..4).map(|i| out_partition(&format!("p{i}"), 100 * i as u64, 3)).collect();
        let refs: Vec<&Partition> = parts.iter().collect();
        let mut rng = RngStream::new(0, 0);
        let got = assemble_split(&refs, AssembleMode::EnumerateIndex(2), &mut rng).unwrap();
        assert_eq!(got.val_partition_names, vec!["p2"]);
        assert_eq!(got.test_partition_names, vec!["p0", "p1", "p3"]);
    }

    #[test]
    fn assemble_rejects_empty_test_side() {
        let parts: Vec<Partition> =
            (0..3).map(|i| out_partition(&format!("p{i}"), 100 * i as u64, 2)).collect();
        let refs: Vec<&Partition> = parts.iter().collect();
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            assemble_split(&refs, AssembleMode::Sample { n_val_partitions: 3 }, &mut rng),
            Err(Error::BadPartitionCount(_))
        ));
    }

    #[test]
    fn half_split_sizes() {
        let p10 = out_partition("a", 0, 10);
        let p11 = out_partition("b", 100, 11);
        let refs: Vec<&Partition> = vec![&p10, &p11];
        let mut rng = RngStream::new(5, 0);
        let (val, test) = split_each_partition_half(&refs, &mut rng).unwrap();
        // 5 + 6 on the validation side, extra sample to val
        assert_eq!(val.len(), 11);
        assert_eq!(test.len(), 10);
        let val_b = val.iter().filter(|s| s.partition_tag == "b").count();
        assert_eq!(val_b, 6);
    }

    #[test]
    fn half_split_determinism_and_disjointness() {
        let p = out_partition("a", 0, 9);
        let refs: Vec<&Partition> = vec![&p];
        let run = |seed| {
            let mut rng = RngStream::new(seed, 1);
            let (val, test) = split_each_partition_half(&refs, &mut rng).unwrap();
            (uids(&val), uids(&test))
        };
        assert_eq!(run(7), run(7));
        let (val, test) = run(7);
        let mut all = val.clone();
        all.extend(test);
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<u64>>());
        let single = out_partition("c", 0, 1);
        let mut rng = RngStream::new(0, 0);
        assert!(split_each_partition_half(&[&single], &mut rng).is_err());
    }

    #[test]
    fn balance_min_rule() {
        let ins = in_samples(200);
        let outs = out_partition("o", 1000, 50).samples;
        let mut rng = RngStream::new(6, 0);
        let (bi, bo) = balance(&ins, &outs, &mut rng).unwrap();
        assert_eq!(bi.len(), 50);
        assert_eq!(bo.len(), 50);
    }

    #[test]
    fn balance_equal_sizes_returns_whole_sets() {
        let ins = in_samples(20);
        let outs = out_partition("o", 1000, 20).samples;
        let mut rng = RngStream::new(6, 0);
        let (bi, bo) = balance(&ins, &outs, &mut rng).unwrap();
        assert_eq!(uids(&bi), uids(&ins));
        assert_eq!(uids(&bo), uids(&outs));
        assert!(balance(&ins, &[], &mut rng).is_err());
    }
}
