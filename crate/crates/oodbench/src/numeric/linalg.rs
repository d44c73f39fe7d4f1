//! Cholesky factorization and SPD solves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Lower-triangular Cholesky factor `L` of an SPD matrix, with `L L^T = A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactor {
    lower: Matrix,
}

/// Factors a symmetric positive-definite matrix into its lower Cholesky factor.
pub fn cholesky_factor(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    if !a.is_symmetric(1e-9 * (1.0 + a.trace().abs())) {
        return Err(Error::BadArgument("cholesky requires a symmetric matrix".into()));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            diag -= v * v;
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { col: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

impl CholeskyFactor {
    pub fn of(a: &Matrix) -> Result<Self> {
        Ok(Self { lower: cholesky_factor(a)? })
    }

    pub fn from_lower(lower: Matrix) -> Self {
        Self { lower }
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// Solves `L y = b` by forward substitution.
    pub fn forward_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower.get(i, k) * y[k];
            }
            y[i] = s / self.lower.get(i, i);
        }
        Ok(y)
    }

    /// Solves `L^T x = y` by back substitution.
    pub fn backward_solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower.get(k, i) * x[k];
            }
            x[i] = s / self.lower.get(i, i);
        }
        Ok(x)
    }

    /// Solves `A x = b` where `A = L L^T`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.backward_solve(&self.forward_solve(b)?)
    }

    /// Squared Mahalanobis-style quadratic form `d^T A^{-1} d`.
    pub fn quadratic_form_inv(&self, d: &[f64]) -> Result<f64> {
        let y = self.forward_solve(d)?;
        Ok(y.iter().map(|v| v * v).sum())
    }
}

/// Solves the SPD system `A x = b` via Cholesky factorization.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    CholeskyFactor::of(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    fn random_spd(n: usize, rng: &mut RngStream) -> Matrix {
        // B B^T + n * I is SPD for any square B
        let mut b = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b.set(i, j, rng.normal());
            }
        }
        let mut a = b.mul_transpose_of(&b).unwrap();
        for i in 0..n {
            a.set(i, i, a.get(i, i) + n as f64);
        }
        a
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_factors_to_identity() {
        let i3 = Matrix::identity(3);
        assert_eq!(cholesky_factor(&i3).unwrap(), i3);
    }

    #[test]
    fn diagonal_factors_analytically() {
        let a = Matrix::new(2, 2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let l = cholesky_factor(&a).unwrap();
        assert_eq!(l, Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 3.0]).unwrap());
    }

    #[test]
    fn factor_reconstructs_random_spd() {
        // oracle: multiply the returned factor back together
        let mut rng = RngStream::new(42, 0);
        let a = random_spd(5, &mut rng);
        let l = cholesky_factor(&a).unwrap();
        let back = l.mul_transpose_of(&l).unwrap();
        let scale = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&a, &back) <= 1e-8 * scale);
    }

    #[test]
    fn non_spd_is_rejected() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        match cholesky_factor(&a) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_is_rejected() {
        let a = Matrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(cholesky_factor(&a).is_err());
    }

    #[test]
    fn solve_identity_is_echo() {
        let x = solve_spd(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_diagonal_scaling() {
        let a = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let x = solve_spd(&a, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_residual_is_small_on_random_system() {
        // oracle: residual of the re-multiplied solution
        let mut rng = RngStream::new(7, 1);
        let a = random_spd(8, &mut rng);
        let b: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let x = solve_spd(&a, &b).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        let res = ax
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0f64, f64::max);
        let bmax = b.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        assert!(res <= 1e-6 * bmax, "residual {res} vs bound {}", 1e-6 * bmax);
    }

    #[test]
    fn quadratic_form_matches_solve() {
        let mut rng = RngStream::new(9, 2);
        let a = random_spd(4, &mut rng);
        let d: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let f = CholeskyFactor::of(&a).unwrap();
        let direct = f.quadratic_form_inv(&d).unwrap();
        let x = f.solve(&d).unwrap();
        let via_solve: f64 = d.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert!((direct - via_solve).abs() <= 1e-10 * (1.0 + direct.abs()));
    }
}
