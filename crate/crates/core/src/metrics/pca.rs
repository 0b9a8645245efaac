use crate::error::{Error, Result};
use crate::gmm::{biased_covariance, column_means};
use crate::latent::LatentSet;
use crate::linalg::SymmetricEigen;
use crate::scalar::Scalar;

/// Principal axes of a fitted set.
///
/// Components are ordered by descending variance; each is flipped so that
/// its largest-magnitude entry is positive, which makes projections
/// reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca<T> {
    mean: Vec<T>,
    components: Vec<Vec<T>>,
    variances: Vec<T>,
}

impl<T: Scalar> Pca<T> {
    pub fn fit(latents: &LatentSet<T>, out_dims: usize) -> Result<Self> {
        if latents.len() < 2 {
            return Err(Error::InvalidArgument(format!("PCA needs at least 2 vectors, got {}", latents.len())));
        }
        if out_dims == 0 || out_dims > latents.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot project {}-dimensional data onto {out_dims} components",
                latents.dim()
            )));
        }
        let mean = column_means(latents);
        let eig = SymmetricEigen::new(&biased_covariance(latents, &mean));
        let components = (0..out_dims)
            .map(|c| {
                let mut v = eig.vector(c);
                let lead = v.iter().copied().fold(T::zero(), |acc, x| if x.abs() > acc.abs() { x } else { acc });
                if lead < T::zero() {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        Ok(Self {
            mean,
            components,
            variances: eig.values[..out_dims].to_vec(),
        })
    }

    pub fn out_dims(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[T] {
        &self.variances
    }

    /// Centers with the fitted mean and projects onto the fitted axes.
    pub fn transform(&self, latents: &LatentSet<T>) -> Result<LatentSet<T>> {
        if latents.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: latents.dim(),
            });
        }
        let mut out = Vec::with_capacity(latents.len() * self.out_dims());
        for row in latents.rows() {
            for axis in &self.components {
                out.push(row.iter().zip(&self.mean).zip(axis).map(|((&x, &m), &a)| (x - m) * a).sum());
            }
        }
        Ok(LatentSet::from_trusted(out, self.out_dims()))
    }
}

/// Fits PCA on `latents` and projects the same set to `out_dims` columns.
pub fn pca_project<T: Scalar>(latents: &LatentSet<T>, out_dims: usize) -> Result<LatentSet<T>> {
    Pca::fit(latents, out_dims)?.transform(latents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_set(n: usize, d: usize, seed: u64) -> LatentSet<f64> {
        let mut rng = crate::rng::seeded(seed);
        let data = (0..n * d).map(|i| rng.random_range(-1.0..1.0) * (1.0 + (i % d) as f64)).collect();
        LatentSet::new(data, d).unwrap()
    }

    #[test]
    fn axis_aligned_variance_projects_to_centered_first_coordinate() {
        let set = LatentSet::from_rows(&[[1.0, 2.0], [3.0, 2.0], [8.0, 2.0]]).unwrap();
        let p = pca_project(&set, 1).unwrap();
        let mean = 4.0f64;
        for (row, proj) in set.rows().zip(p.rows()) {
            assert!((proj[0] - (row[0] - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_projection_is_isometric() {
        let set = random_set(40, 5, 8);
        let p = pca_project(&set, 5).unwrap();
        for i in 0..set.len() {
            for j in 0..set.len() {
                let dist = |s: &LatentSet<f64>| {
                    s.row(i).iter().zip(s.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                };
                assert!((dist(&set) - dist(&p)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn variance_is_ordered_and_projection_deterministic() {
        let set = random_set(300, 4, 9);
        let p = pca_project(&set, 2).unwrap();
        let var = |c: Vec<f64>| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        };
        assert!(var(p.column(0)) >= var(p.column(1)));
        assert_eq!(p, pca_project(&set, 2).unwrap());
    }

    #[test]
    fn sign_convention_holds() {
        let pca = Pca::fit(&random_set(100, 3, 10), 3).unwrap();
        for axis in pca.components() {
            let lead = axis.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn too_many_output_dims() {
        assert!(pca_project(&random_set(10, 2, 1), 3).is_err());
        assert!(pca_project(&random_set(1, 2, 1), 1).is_err());
    }
}
