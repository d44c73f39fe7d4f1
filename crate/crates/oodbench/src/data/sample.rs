//! Sample, partition, and benchmark containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth in/out label of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OodLabel {
    In,
    Out,
}

impl OodLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            OodLabel::In => "in",
            OodLabel::Out => "out",
        }
    }
}

/// The out-data category a partition realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    /// In-distribution (not an out category).
    In,
    /// Unrelated inputs.
    Uc1,
    /// Incorrectly prepared inputs.
    Uc2,
    /// Inputs unseen due to selection bias.
    Uc3,
}

impl UseCase {
    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::In => "in",
            UseCase::Uc1 => "uc1",
            UseCase::Uc2 => "uc2",
            UseCase::Uc3 => "uc3",
        }
    }

    pub fn from_digit(d: u32) -> Option<UseCase> {
        match d {
            1 => Some(UseCase::Uc1),
            2 => Some(UseCase::Uc2),
            3 => Some(UseCase::Uc3),
            _ => None,
        }
    }
}

/// Task class assigned to out-samples; never consumed by any detector.
pub const OUT_CLASS_SENTINEL: i32 = -1;

/// One input vector with its task label, source partition, and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// Unique id within a benchmark; used for disjointness audits.
    pub uid: u64,
    /// Flattened image or feature vector; every value in `[0, 1]`.
    pub input: Vec<f64>,
    pub task_class: i32,
    pub partition_tag: String,
    pub ood_label: OodLabel,
}

impl LabeledSample {
    pub fn new(
        uid: u64,
        input: Vec<f64>,
        task_class: i32,
        partition_tag: impl Into<String>,
        ood_label: OodLabel,
    ) -> Result<Self> {
        let partition_tag = partition_tag.into();
        if partition_tag.is_empty() {
            return Err(Error::BadArgument("partition_tag must be nonempty".into()));
        }
        if let Some(v) = input.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Domain(format!("input value {v} outside [0, 1]")));
        }
        Ok(Self { uid, input, task_class, partition_tag, ood_label })
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }
}

/// A named group of samples sharing one out-data category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub use_case: UseCase,
    pub samples: Vec<LabeledSample>,
}

impl Partition {
    pub fn new(name: impl Into<String>, use_case: UseCase, samples: Vec<LabeledSample>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let implied = if use_case == UseCase::In { OodLabel::In } else { OodLabel::Out };
        if samples.iter().any(|s| s.ood_label != implied) {
            return Err(Error::BadArgument(format!(
                "partition {name}: sample ood_label disagrees with use case {}",
                use_case.as_str()
            )));
        }
        Ok(Self { name, use_case, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The three in-distribution splits plus the out-partition roster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkData {
    pub d_tr: Vec<LabeledSample>,
    pub d_val_in: Vec<LabeledSample>,
    pub d_test_in: Vec<LabeledSample>,
    pub out_partitions: Vec<Partition>,
}

impl BenchmarkData {
    /// Validates that the three in-distribution splits are pairwise disjoint.
    pub fn new(
        d_tr: Vec<LabeledSample>,
        d_val_in: Vec<LabeledSample>,
        d_test_in: Vec<LabeledSample>,
        out_partitions: Vec<Partition>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in d_tr.iter().chain(&d_val_in).chain(&d_test_in) {
            if !seen.insert(s.uid) {
                return Err(Error::BadSpec(format!(
                    "sample {} appears in more than one in-split",
                    s.uid
                )));
            }
        }
        Ok(BenchmarkData { d_tr, d_val_in, d_test_in, out_partitions })
    }

    pub fn dim(&self) -> usize {
        self.d_tr.first().map(LabeledSample::dim).unwrap_or(0)
    }

    /// In-task class ids present in `d_tr`, ascending.
    pub fn in_classes(&self) -> Vec<i32> {
        let mut cs: Vec<i32> = self.d_tr.iter().map(|s| s.task_class).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    }

    /// Out partitions belonging to one use case, in roster order.
    pub fn partitions_for(&self, uc: UseCase) -> Vec<&Partition> {
        self.out_partitions.iter().filter(|p| p.use_case == uc).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(uid: u64, label: OodLabel) -> LabeledSample {
        LabeledSample::new(uid, vec![0.5, 0.25], 0, "p", label).unwrap()
    }

    #[test]
    fn sample_rejects_out_of_range_input() {
        assert!(LabeledSample::new(0, vec![0.5, 1.5], 0, "p", OodLabel::In).is_err());
        assert!(LabeledSample::new(0, vec![-0.1], 0, "p", OodLabel::In).is_err());
        assert!(LabeledSample::new(0, vec![f64::NAN], 0, "p", OodLabel::In).is_err());
        assert!(LabeledSample::new(0, vec![0.5], 0, "", OodLabel::In).is_err());
    }

    #[test]
    fn partition_enforces_label_implication() {
        let out = sample(0, OodLabel::Out);
        let inn = sample(1, OodLabel::In);
        assert!(Partition::new("p", UseCase::Uc1, vec![out.clone()]).is_ok());
        assert!(Partition::new("p", UseCase::Uc1, vec![inn.clone()]).is_err());
        assert!(Partition::new("p", UseCase::In, vec![inn]).is_ok());
        assert!(Partition::new("p", UseCase::In, vec![out]).is_err());
        assert!(Partition::new("p", UseCase::Uc2, vec![]).is_err());
    }
}
