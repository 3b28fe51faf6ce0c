//! Multivariate normal draws through a semidefinite Cholesky factor.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PSD_TOL: f64 = 1e-10;

/// `N(mean, Σ)` with a precomputed lower factor `L`, `LLᵀ = Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mvn<T> {
    mean: Vec<T>,
    /// Row-major lower triangle.
    factor: Vec<T>,
}

impl<T: Scalar> Mvn<T> {
    /// Factors `cov` (row-major, `d×d`). Pivots within `1e−10·max diag` of
    /// zero are treated as exact zeros, so singular covariances are allowed.
    pub fn new(mean: Vec<T>, cov: &[Vec<T>]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("covariance must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..i {
                let scale = cov[i][j].abs().max(cov[j][i].abs()).max(T::one());
                if (cov[i][j] - cov[j][i]).abs() > T::lit(PSD_TOL) * scale {
                    return Err(Error::Config("covariance is not symmetric".into()));
                }
            }
        }
        let scale = (0..d).map(|i| cov[i][i].abs()).fold(T::zero(), T::max);
        let tol = T::lit(PSD_TOL) * scale.max(T::min_positive_value());
        let mut l = vec![T::zero(); d * d];
        for j in 0..d {
            let mut pivot = cov[j][j];
            for k in 0..j {
                pivot -= l[j * d + k] * l[j * d + k];
            }
            if pivot < -tol {
                return Err(Error::NotPsd {
                    row: j,
                    pivot: pivot.to_f64_lossy(),
                });
            }
            if pivot <= tol {
                // column stays zero; the remaining entries must vanish too
                for i in j + 1..d {
                    let mut v = cov[i][j];
                    for k in 0..j {
                        v -= l[i * d + k] * l[j * d + k];
                    }
                    if v.abs() > tol.sqrt() * scale.sqrt().max(T::one()) {
                        return Err(Error::NotPsd {
                            row: i,
                            pivot: v.to_f64_lossy(),
                        });
                    }
                }
                continue;
            }
            let root = pivot.sqrt();
            l[j * d + j] = root;
            for i in j + 1..d {
                let mut v = cov[i][j];
                for k in 0..j {
                    v -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = v / root;
            }
        }
        Ok(Self { mean, factor: l })
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(mean: Vec<T>, sd: &[T]) -> Result<Self> {
        let d = mean.len();
        let cov: Vec<Vec<T>> = (0..d)
            .map(|i| {
                let mut row = vec![T::zero(); d];
                row[i] = sd[i] * sd[i];
                row
            })
            .collect();
        Self::new(mean, &cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.dim();
        let z: Vec<T> = (0..d).map(|_| T::lit(rng.sample(StandardNormal))).collect();
        (0..d)
            .map(|i| {
                let row = &self.factor[i * d..i * d + i + 1];
                self.mean[i] + row.iter().zip(&z).map(|(&a, &b)| a * b).sum::<T>()
            })
            .collect()
    }
}

/// One draw from `N(mean, cov)`.
pub fn mvn_sample<T: Scalar, R: Rng + ?Sized>(mean: &[T], cov: &[Vec<T>], rng: &mut R) -> Result<Vec<T>> {
    Ok(Mvn::new(mean.to_vec(), cov)?.sample(rng))
}
