//! Synthetic benchmark generator.
//!
//! In-distribution data is a mixture of `K` Gaussian blobs with distinct
//! means on a lattice in `[0,1]^d`. The three out-of-distribution use-cases
//! are realized as:
//!
//! * uc1: inputs foreign to the blob family (uniform noise, constant
//!   images, two-class montages, and a spike mixture whose support is
//!   disjoint from the blob support),
//! * uc2: blob samples corrupted by blur, contrast squashing, or axis
//!   transposition,
//! * uc3: held-out blob classes from the same generative family, one
//!   lattice step away from an in-class mean so they mix with the
//!   in-distribution.

use crate::data::{
    BenchmarkData, LabeledSample, OodLabel, Partition, UseCase, OUT_CLASS_SENTINEL,
};
use crate::data::splits::split_in_data;
use crate::error::{Error, Result};
use crate::numeric::rng::mix;
use crate::numeric::RngStream;

/// Blob-lattice levels; kept away from 0 and 1 so uc1 spikes drawn from
/// `[0, 0.05] ∪ [0.95, 1]` have support disjoint from every blob value.
const LEVELS: [f64; 3] = [0.35, 0.5, 0.65];

/// Minimum allowed distance between two in-class means.
const MIN_IN_SEPARATION: f64 = 0.3;

/// Parameters of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Number of in-distribution classes (K ≥ 2).
    pub n_in_classes: usize,
    /// Number of held-out uc3 classes (H ≥ 1).
    pub n_held_out_classes: usize,
    /// Input dimension; must be a perfect square ≥ 4 so the transpose
    /// corruption is defined.
    pub dim: usize,
    /// In-distribution samples generated per class.
    pub n_per_in_class: usize,
    /// Samples per out-partition.
    pub n_per_out_partition: usize,
    /// Fractions for the D_tr / D_val_in / D_test_in split.
    pub split_fractions: (f64, f64, f64),
    /// Moving-average window of the uc2 blur corruption; odd, ≥ 1.
    pub blur_window: usize,
    /// Strength of the uc2 contrast squash in [0, 1); 0 is the identity.
    pub contrast_strength: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_in_classes: 4,
            n_held_out_classes: 4,
            dim: 16,
            n_per_in_class: 250,
            n_per_out_partition: 100,
            split_fractions: (0.8, 0.1, 0.1),
            blur_window: 5,
            contrast_strength: 0.3,
        }
    }
}

impl SyntheticSpec {
    fn side(&self) -> usize {
        (self.dim as f64).sqrt().round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_in_classes < 2 {
            return Err(Error::BadSpec("need at least 2 in-classes".into()));
        }
        if self.n_held_out_classes < 1 {
            return Err(Error::BadSpec("need at least 1 held-out class".into()));
        }
        if self.n_held_out_classes > self.n_in_classes * self.dim / 2 {
            return Err(Error::BadSpec(format!(
                "at most {} held-out classes fit around {} in-classes",
                self.n_in_classes * self.dim / 2,
                self.n_in_classes
            )));
        }
        let side = self.side();
        if self.dim < 4 || side * side != self.dim {
            return Err(Error::BadSpec(format!(
                "dim {} must be a perfect square >= 4",
                self.dim
            )));
        }
        if self.n_per_in_class < 10 {
            return Err(Error::BadSpec("need at least 10 samples per in-class".into()));
        }
        if self.n_per_out_partition < 2 {
            return Err(Error::BadSpec("need at least 2 samples per out-partition".into()));
        }
        if self.blur_window == 0 || self.blur_window % 2 == 0 || self.blur_window > self.dim {
            return Err(Error::BadSpec(format!(
                "blur window {} must be odd and within the input dimension",
                self.blur_window
            )));
        }
        if !(0.0..1.0).contains(&self.contrast_strength) {
            return Err(Error::BadSpec(format!(
                "contrast strength {} must lie in [0, 1)",
                self.contrast_strength
            )));
        }
        Ok(())
    }

    /// Means of the in-distribution classes.
    ///
    /// Class `c` gets the lattice point whose level in dimension `i` is a
    /// fixed pseudo-random function of `(c, i)`, so means are spread across
    /// the lattice and any two classes differ in most dimensions.
    pub fn in_means(&self) -> Vec<Vec<f64>> {
        (0..self.n_in_classes)
            .map(|c| {
                (0..self.dim)
                    .map(|i| LEVELS[(mix(c as u64 * 1031 + i as u64) % 3) as usize])
                    .collect()
            })
            .collect()
    }

    /// Means of the held-out uc3 classes: lattice points adjacent to an
    /// in-class mean. Held-out class `h` copies the mean of in-class
    /// `h mod K` and moves one dimension one lattice level, so every
    /// held-out class stays in the in-family's style without coinciding
    /// with any in-class mean (a single-step move is shorter than the
    /// minimum in-class separation).
    pub fn held_out_means(&self) -> Vec<Vec<f64>> {
        let in_means = self.in_means();
        let n_candidates = self.dim * 2;
        let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(self.n_held_out_classes);
        for h in 0..self.n_held_out_classes {
            let start = (mix(h as u64 * 2099 + 7) % n_candidates as u64) as usize;
            let candidate = (0..self.n_in_classes * n_candidates)
                .map(|t| {
                    let parent = &in_means[(h + t / n_candidates) % self.n_in_classes];
                    self.flipped_mean(parent, (start + t) % n_candidates)
                })
                .find(|m| !chosen.contains(m))
                .expect("lattice has more flip candidates than held-out classes");
            chosen.push(candidate);
        }
        chosen
    }

    /// Decodes candidate index `c` into a dimension and a direction, and
    /// returns the parent mean with that dimension moved one lattice level
    /// (middle levels move in the decoded direction, edge levels move to
    /// the middle).
    fn flipped_mean(&self, parent: &[f64], c: usize) -> Vec<f64> {
        let i = c / 2;
        let dir = c % 2;
        let mut m = parent.to_vec();
        let level = LEVELS.iter().position(|l| (l - m[i]).abs() < 1e-12).expect("on lattice");
        let next = match level {
            0 | 2 => 1,
            _ => {
                if dir == 0 {
                    0
                } else {
                    2
                }
            }
        };
        m[i] = LEVELS[next];
        m
    }

    /// Per-dimension standard deviation of every blob:
    /// `0.5 × min inter-mean distance / sqrt(d)` over the in-class means.
    pub fn blob_sigma(&self) -> f64 {
        0.5 * min_pairwise_distance(&self.in_means()) / (self.dim as f64).sqrt()
    }
}

fn min_pairwise_distance(means: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..means.len() {
        for b in (a + 1)..means.len() {
            let d2: f64 = means[a]
                .iter()
                .zip(&means[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            best = best.min(d2.sqrt());
        }
    }
    best
}

/// Centered moving average with window `w` (odd); the window is truncated at
/// the vector boundaries.
pub fn blur_moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Affine squash toward 0.5: `y = 0.5 + (1 − strength)·(x − 0.5)`.
pub fn contrast_squash(x: &[f64], strength: f64) -> Vec<f64> {
    x.iter().map(|&v| 0.5 + (1.0 - strength) * (v - 0.5)).collect()
}

/// Transposes a flattened `side × side` square image.
pub fn transpose_square(x: &[f64], side: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for r in 0..side {
        for c in 0..side {
            y[c * side + r] = x[r * side + c];
        }
    }
    y
}

struct Gen<'a> {
    spec: &'a SyntheticSpec,
    sigma: f64,
    next_uid: u64,
}

impl Gen<'_> {
    fn uid(&mut self) -> u64 {
        let u = self.next_uid;
        self.next_uid += 1;
        u
    }

    /// Blob sample around `mean`. The clamp sits more than 4σ from every
    /// lattice level, so it almost never binds; it guarantees that in-family
    /// values stay inside [0.1, 0.9] and the spike montage's value range is
    /// disjoint from them.
    fn blob_input(&self, mean: &[f64], rng: &mut RngStream) -> Vec<f64> {
        mean.iter()
            .map(|&m| (m + self.sigma * rng.normal()).clamp(0.1, 0.9))
            .collect()
    }

    fn sample(
        &mut self,
        input: Vec<f64>,
        task_class: i32,
        tag: &str,
        label: OodLabel,
    ) -> Result<LabeledSample> {
        LabeledSample::new(self.uid(), input, task_class, tag, label)
    }

    fn out_partition<F>(
        &mut self,
        name: &str,
        use_case: UseCase,
        rng: &mut RngStream,
        mut draw: F,
    ) -> Result<Partition>
    where
        F: FnMut(&mut Self, &mut RngStream) -> Vec<f64>,
    {
        let samples = (0..self.spec.n_per_out_partition)
            .map(|_| {
                let input = draw(self, rng);
                self.sample(input, OUT_CLASS_SENTINEL, name, OodLabel::Out)
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(name, use_case, samples)
    }
}

/// Generates the full benchmark: in-distribution splits plus uc1/uc2/uc3
/// out-partitions. Bit-reproducible from `(spec, rng)`.
pub fn make_synthetic_benchmark(spec: &SyntheticSpec, rng: &RngStream) -> Result<BenchmarkData> {
    spec.validate()?;
    let in_means = spec.in_means();
    if min_pairwise_distance(&in_means) < MIN_IN_SEPARATION {
        return Err(Error::BadSpec(format!(
            "in-class means closer than {MIN_IN_SEPARATION}; lower the class count or raise dim"
        )));
    }
    let held_out_means = spec.held_out_means();
    let side = spec.side();
    let mut gen = Gen { spec, sigma: spec.blob_sigma(), next_uid: 0 };

    let mut in_samples = Vec::with_capacity(spec.n_in_classes * spec.n_per_in_class);
    let mut in_rng = rng.substream(1);
    for (c, mean) in in_means.iter().enumerate() {
        for _ in 0..spec.n_per_in_class {
            let input = gen.blob_input(mean, &mut in_rng);
            in_samples.push(gen.sample(input, c as i32, "in", OodLabel::In)?);
        }
    }
    let (d_tr, d_val_in, d_test_in) =
        split_in_data(&in_samples, spec.split_fractions, &mut rng.substream(2))?;

    // The uc1 partitions keep mid-range values, so their per-value
    // cross-entropy floor matches in-data and the classifier sees no class
    // evidence in them: their logits fall to the output bias floor, below
    // every in-distribution sample, which classifier-side scores (confidence
    // and linear functions of the logits alike) pick up. Their novel
    // cross-dimension structure keeps distance and reconstruction scores
    // high. The spike mixture is the disjoint-support member: a quarter of
    // its dimensions leave the in-family's value range entirely.
    let mut partitions = Vec::new();
    let mut uc1_rng = rng.substream(3);
    let d = spec.dim;
    partitions.push(gen.out_partition("uc1_uniform_noise", UseCase::Uc1, &mut uc1_rng, |_, r| {
        (0..d).map(|_| r.uniform_in(0.25, 0.75)).collect()
    })?);
    partitions.push(gen.out_partition("uc1_constant", UseCase::Uc1, &mut uc1_rng, |_, r| {
        let v = r.uniform_in(0.3, 0.7);
        vec![v; d]
    })?);
    partitions.push(gen.out_partition("uc1_checkerboard", UseCase::Uc1, &mut uc1_rng, |_, r| {
        let (lo, hi) = (r.uniform_in(0.33, 0.40), r.uniform_in(0.60, 0.67));
        (0..d).map(|i| if (i / side + i % side) % 2 == 0 { lo } else { hi }).collect()
    })?);
    partitions.push(gen.out_partition("uc1_level_noise", UseCase::Uc1, &mut uc1_rng, |g, r| {
        let point: Vec<f64> = (0..d).map(|_| LEVELS[r.below(3)]).collect();
        g.blob_input(&point, r)
    })?);
    partitions.push(gen.out_partition("uc1_shuffled_blob", UseCase::Uc1, &mut uc1_rng, |g, r| {
        let class = r.below(g.spec.n_in_classes);
        let mut x = g.blob_input(&in_means[class], r);
        r.shuffle(&mut x);
        x
    })?);
    partitions.push(gen.out_partition("uc1_spike_mix", UseCase::Uc1, &mut uc1_rng, |_, r| {
        let mut x: Vec<f64> = (0..d).map(|_| r.uniform_in(0.3, 0.7)).collect();
        for (j, i) in r.sample_indices(d, d.div_ceil(4)).into_iter().enumerate() {
            x[i] = if j % 2 == 0 { r.uniform_in(0.95, 1.0) } else { r.uniform_in(0.0, 0.05) };
        }
        x
    })?);

    let mut uc2_rng = rng.substream(4);
    let blur_window = spec.blur_window;
    let contrast = spec.contrast_strength;
    let corruptions: [(&str, Box<dyn Fn(&[f64]) -> Vec<f64>>); 3] = [
        ("uc2_blur", Box::new(move |x: &[f64]| blur_moving_average(x, blur_window))),
        ("uc2_contrast", Box::new(move |x: &[f64]| contrast_squash(x, contrast))),
        ("uc2_transpose", Box::new(move |x: &[f64]| transpose_square(x, side))),
    ];
    for (name, corrupt) in &corruptions {
        partitions.push(gen.out_partition(name, UseCase::Uc2, &mut uc2_rng, |g, r| {
            let class = r.below(g.spec.n_in_classes);
            corrupt(&g.blob_input(&in_means[class], r))
        })?);
    }

    let mut uc3_rng = rng.substream(5);
    for (h, mean) in held_out_means.iter().enumerate() {
        let name = format!("uc3_heldout_{h}");
        partitions.push(gen.out_partition(&name, UseCase::Uc3, &mut uc3_rng, |g, r| {
            g.blob_input(mean, r)
        })?);
    }

    BenchmarkData::new(d_tr, d_val_in, d_test_in, partitions)
}
