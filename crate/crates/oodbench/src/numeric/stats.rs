//! Elementary statistical kernels: stable softmax, nearest-neighbor
//! distances, and tied-covariance estimation.

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Temperature-scaled softmax, computed with max-subtraction.
///
/// Logits are divided by `temperature` before exponentiation.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::BadArgument(format!("temperature must be positive, got {temperature}")));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::NotFinite(format!("logit {bad}")));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_pool_dims(query: &[f64], pool: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::BadArgument("k must be positive".into()));
    }
    if k > pool.len() {
        return Err(Error::PoolTooSmall { k, n: pool.len() });
    }
    for p in pool {
        if p.len() != query.len() {
            return Err(Error::DimensionMismatch { expected: query.len(), got: p.len() });
        }
    }
    Ok(())
}

/// Euclidean distance from `query` to its k-th nearest pool member.
/// Ties are broken by input order.
pub fn kth_nearest_distance(query: &[f64], pool: &[Vec<f64>], k: usize) -> Result<f64> {
    Ok(k_nearest_indices(query, pool, k)?
        .last()
        .map(|&(_, d)| d)
        .expect("k >= 1"))
}

/// Indices and distances of the `k` nearest pool members, nearest first.
/// Distance ties keep the smaller input index first.
pub fn k_nearest_indices(query: &[f64], pool: &[Vec<f64>], k: usize) -> Result<Vec<(usize, f64)>> {
    check_pool_dims(query, pool, k)?;
    let mut dists: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| (i, squared_distance(query, p)))
        .collect();
    dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    dists.truncate(k);
    Ok(dists.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect())
}

/// Per-class means plus one covariance pooled across classes.
///
/// The covariance is `(1/N) * sum_c sum_{x in c} (x - mu_c)(x - mu_c)^T`
/// with `lambda * I` added to the diagonal, where
/// `lambda = max(1e-6 * trace / d, 1e-12)`. The floor keeps the estimate
/// positive definite when all samples coincide.
pub fn mean_and_tied_covariance(
    groups: &[(i32, Vec<Vec<f64>>)],
) -> Result<(Vec<(i32, Vec<f64>)>, Matrix)> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = groups
        .iter()
        .flat_map(|(_, xs)| xs.first())
        .map(|x| x.len())
        .next()
        .ok_or(Error::EmptyClass(groups[0].0))?;

    let mut means = Vec::with_capacity(groups.len());
    let mut total = 0usize;
    for (class, xs) in groups {
        if xs.is_empty() {
            return Err(Error::EmptyClass(*class));
        }
        let mut mu = vec![0.0; dim];
        for x in xs {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
            }
            for (m, v) in mu.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mu {
            *m /= xs.len() as f64;
        }
        means.push((*class, mu));
        total += xs.len();
    }

    let mut cov = Matrix::zeros(dim, dim);
    for ((_, xs), (_, mu)) in groups.iter().zip(&means) {
        for x in xs {
            for i in 0..dim {
                let di = x[i] - mu[i];
                for j in i..dim {
                    let v = cov.get(i, j) + di * (x[j] - mu[j]);
                    cov.set(i, j, v);
                }
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov.get(i, j) / total as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let lambda = (1e-6 * cov.trace() / dim as f64).max(1e-12);
    for i in 0..dim {
        cov.set(i, i, cov.get(i, i) + lambda);
    }
    Ok((means, cov))
}

/// Regularization strength used by [`mean_and_tied_covariance`], exposed for
/// tests that need the exact diagonal shift.
pub fn covariance_ridge(raw_trace: f64, dim: usize) -> f64 {
    (1e-6 * raw_trace / dim as f64).max(1e-12)
}

/// Arithmetic mean.
pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewValues);
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Index of the maximum; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Median; averages the middle pair for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}
