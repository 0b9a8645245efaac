use crate::error::{Error, Result};
use crate::gmm::{biased_covariance, column_means};
use crate::latent::LatentSet;
use crate::linalg::{SquareMatrix, SymmetricEigen};
use crate::scalar::Scalar;

/// Mean and covariance summarizing a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<T> {
    mean: Vec<T>,
    covariance: SquareMatrix<T>,
}

impl<T: Scalar> GaussianStats<T> {
    /// Requires a symmetric (within `1e-10`) positive-semidefinite covariance.
    pub fn new(mean: Vec<T>, covariance: SquareMatrix<T>) -> Result<Self> {
        if covariance.dim() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: covariance.dim(),
            });
        }
        let asym = covariance.max_asymmetry().as_f64();
        if asym > 1e-10 {
            return Err(Error::NotSymmetric(asym));
        }
        let floor = -1e-10 * covariance.max_abs().as_f64().max(1.0);
        let eig = SymmetricEigen::new(&covariance);
        if let Some(low) = eig.values.last() {
            if low.as_f64() < floor {
                return Err(Error::InvalidArgument(format!("covariance has negative eigenvalue {low}")));
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &SquareMatrix<T> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and the biased (`1/n`) covariance of `latents`.
pub fn gaussian_stats<T: Scalar>(latents: &LatentSet<T>) -> Result<GaussianStats<T>> {
    if latents.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Gaussian statistics need at least 2 vectors, got {}",
            latents.len()
        )));
    }
    let mean = column_means(latents);
    let covariance = biased_covariance(latents, &mean);
    Ok(GaussianStats { mean, covariance })
}

/// Symmetric square root of a symmetric PSD matrix; eigenvalues below zero
/// (round-off) are clipped.
pub fn matrix_sqrt_psd<T: Scalar>(m: &SquareMatrix<T>) -> Result<SquareMatrix<T>> {
    let asym = m.max_asymmetry().as_f64();
    if asym > 1e-8 * m.max_abs().as_f64().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(m);
    Ok(eig.reconstruct_with(|l| l.max(T::zero()).sqrt()))
}

/// `|mu_r - mu_s|^2 + tr(S_r + S_s - 2 (S_r^{1/2} S_s S_r^{1/2})^{1/2})`.
///
/// The inner product is taken in its symmetric form, which has the same trace
/// of square root as `(S_r S_s)^{1/2}` but stays PSD under round-off.
pub fn frechet_gaussian_distance<T: Scalar>(r: &GaussianStats<T>, s: &GaussianStats<T>) -> Result<T> {
    if r.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            got: s.dim(),
        });
    }
    let mean_term: T = r.mean.iter().zip(&s.mean).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let root_r = matrix_sqrt_psd(&r.covariance)?;
    let mut inner = root_r.matmul(&s.covariance).matmul(&root_r);
    inner.symmetrize();
    let cross = matrix_sqrt_psd(&inner)?.trace();
    let two = T::one() + T::one();
    let value = mean_term + r.covariance.trace() + s.covariance.trace() - two * cross;
    Ok(value.max(T::zero()))
}
